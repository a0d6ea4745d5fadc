use super::{ComparisonError, PiecewiseLinear, ScalarFn};

/// Number of grid halvings attempted before giving up.
pub const KAPPA_MAX_REFINEMENTS: u32 = 4;
/// Upper bound on the number of table breakpoints.
pub const KAPPA_MAX_POINTS: usize = 4_000_000;

/// Builds `κ(r) = ½ r + ½ max_{r′ ∈ [0, r]} (r′ − α₃(r′))` as a
/// piecewise-linear table on `[0, min(extent, α₃ cap)]`.
///
/// The inner maximum is a running maximum over a uniform grid of spacing
/// `grid_step`, merged with the breakpoints of `α₃` when `α₃` is itself a
/// table. On that grid the table satisfies `κ(r) ≥ r − ½ α₃(r)` at every
/// breakpoint, which gives the strict sandwich `r > κ(r) > r − α₃(r)` for
/// `r > 0`. Both strict inequalities and strict monotonicity are re-checked
/// in floating point; the grid is halved and rebuilt on failure.
pub fn construct_kappa(alpha3: &ScalarFn, grid_step: f64, extent: f64) -> Result<ScalarFn, ComparisonError> {
    if !alpha3.class().is_k {
        return Err(ComparisonError::NotKFunction);
    }
    if !(grid_step > 0.0) || !(extent > 0.0) {
        return Err(ComparisonError::InvalidParameter(format!(
            "grid step {grid_step} and extent {extent} must be positive"
        )));
    }
    let cap = extent.min(alpha3.domain_cap());
    let extra: Vec<f64> = match alpha3 {
        ScalarFn::Table { points } => points.breakpoints().iter().copied().filter(|&b| b < cap).collect(),
        _ => Vec::new(),
    };

    let mut first_failure = cap;
    for refinement in 0..=KAPPA_MAX_REFINEMENTS {
        let step = grid_step / f64::from(1u32 << refinement);
        let n = (cap / step).ceil();
        if n + extra.len() as f64 + 1.0 > KAPPA_MAX_POINTS as f64 {
            break;
        }
        let grid = merged_grid(n as usize, step, cap, &extra);
        match tabulate(alpha3, &grid)? {
            Ok(points) => return Ok(ScalarFn::Table { points }),
            Err(r) => first_failure = r,
        }
    }
    Err(ComparisonError::RefinementFailed { refinements: KAPPA_MAX_REFINEMENTS, r: first_failure })
}

/// Uniform grid merged with the breakpoints of `α₃`. Uniform points within
/// a rounding distance of a breakpoint are dropped in its favour.
fn merged_grid(n: usize, step: f64, cap: f64, extra: &[f64]) -> Vec<f64> {
    let near = 1e-9 * step;
    let clashes = |r: f64| {
        let j = extra.partition_point(|&b| b < r);
        (j > 0 && r - extra[j - 1] <= near) || (j < extra.len() && extra[j] - r <= near)
    };
    let mut grid: Vec<f64> = (0..n).map(|i| i as f64 * step).filter(|&r| r < cap && !clashes(r)).collect();
    grid.push(cap);
    if !extra.is_empty() {
        grid.extend_from_slice(extra);
        grid.sort_by(f64::total_cmp);
        grid.dedup();
    }
    grid
}

/// Returns the table, or the first breakpoint where the sandwich fails.
fn tabulate(alpha3: &ScalarFn, grid: &[f64]) -> Result<Result<PiecewiseLinear, f64>, ComparisonError> {
    let mut values = Vec::with_capacity(grid.len());
    let mut running_max = 0.0f64;
    let mut prev = -1.0;
    for &r in grid {
        let lower = r - alpha3.eval(r)?;
        running_max = running_max.max(lower);
        let k = 0.5 * r + 0.5 * running_max;
        if r > 0.0 && !(k < r && k > lower && k > prev) {
            return Ok(Err(r));
        }
        values.push(k);
        prev = k;
    }
    Ok(Ok(PiecewiseLinear::new(grid.to_vec(), values)?))
}

/// `κᵗ(r)`, the t-fold composition, with `κ⁰(r) = r`.
pub fn iterate_kappa(kappa: &ScalarFn, r: f64, t: u64) -> Result<f64, ComparisonError> {
    let mut s = r;
    for _ in 0..t {
        if s == 0.0 {
            break;
        }
        let next = kappa.eval(s)?;
        if next > s {
            return Err(ComparisonError::NotContraction { r: s, value: next });
        }
        s = next;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_sandwich(kappa: &ScalarFn, alpha3: &ScalarFn) {
        let ScalarFn::Table { points } = kappa else { panic!("κ should be a table") };
        for &r in &points.breakpoints()[1..] {
            let k = kappa.eval(r).unwrap();
            assert!(r > k && k > r - alpha3.eval(r).unwrap(), "sandwich fails at {r}");
        }
    }

    #[test]
    fn half_linear_decrease_gives_three_quarters() {
        let a3 = ScalarFn::linear(0.5);
        let k = construct_kappa(&a3, 0.01, 10.0).unwrap();
        assert_sandwich(&k, &a3);
        for r in [0.0, 0.013, 1.0, 3.3, 10.0] {
            assert!((k.eval(r).unwrap() - 0.75 * r).abs() <= 1e-12);
        }
    }

    #[test]
    fn unit_decrease_gives_half() {
        let a3 = ScalarFn::linear(1.0);
        let k = construct_kappa(&a3, 0.01, 10.0).unwrap();
        for r in [0.0, 0.5, 7.25] {
            assert!((k.eval(r).unwrap() - 0.5 * r).abs() <= 1e-12);
        }
    }

    #[test]
    fn kappa_vanishes_at_zero() {
        let k = construct_kappa(&ScalarFn::power(1.0, 2.0), 0.1, 5.0).unwrap();
        assert_eq!(k.eval(0.0).unwrap(), 0.0);
        assert!(k.class().is_k);
    }

    #[test]
    fn table_alpha_breakpoints_are_kept() {
        let a3 = ScalarFn::table(&[[0.0, 0.0], [0.33, 0.1089], [1.0, 1.0], [4.0, 4.0]]).unwrap();
        let k = construct_kappa(&a3, 0.25, 4.0).unwrap();
        let ScalarFn::Table { points } = &k else { unreachable!() };
        assert!(points.breakpoints().contains(&0.33));
        assert_sandwich(&k, &a3);
    }

    #[test]
    fn near_duplicate_grid_points_are_merged() {
        // 83 · 0.01 rounds just above the breakpoint 0.83
        let pts: Vec<[f64; 2]> = (0..=1000).map(|i| i as f64 / 100.0).map(|r| [r, r.min(r * r)]).collect();
        let a3 = ScalarFn::table(&pts).unwrap();
        let k = construct_kappa(&a3, 0.01, 10.0).unwrap();
        let ScalarFn::Table { points } = &k else { unreachable!() };
        assert!(points.breakpoints().contains(&0.83));
        assert!(!points.breakpoints().contains(&(83.0 * 0.01)));
        assert_sandwich(&k, &a3);
    }

    #[test]
    fn fast_vanishing_decrease_still_builds() {
        // α₃(r) = r⁴: κ approaches r near the origin but stays strictly below it
        let a3 = ScalarFn::power(1.0, 4.0);
        let k = construct_kappa(&a3, 0.01, 2.0).unwrap();
        assert_sandwich(&k, &a3);
    }

    #[test]
    fn numerically_zero_decrease_fails_refinement() {
        let a3 = ScalarFn::power(1.0, 40.0);
        assert!(matches!(construct_kappa(&a3, 0.01, 1.0), Err(ComparisonError::RefinementFailed { .. })));
    }

    #[test]
    fn not_k_rejected() {
        assert_eq!(construct_kappa(&ScalarFn::zero(), 0.1, 1.0), Err(ComparisonError::NotKFunction));
    }

    #[test]
    fn iterate_examples() {
        assert_eq!(iterate_kappa(&ScalarFn::linear(0.5), 8.0, 3).unwrap(), 1.0);
        assert_eq!(iterate_kappa(&ScalarFn::linear(0.5), 8.0, 0).unwrap(), 8.0);
        let mut expected = 1.0;
        for _ in 0..4 {
            expected *= 0.75;
        }
        assert_eq!(iterate_kappa(&ScalarFn::linear(0.75), 1.0, 4).unwrap(), expected);
        assert_eq!(expected, 0.31640625);
    }

    #[test]
    fn iterate_detects_expansion() {
        assert!(matches!(
            iterate_kappa(&ScalarFn::linear(1.5), 1.0, 2),
            Err(ComparisonError::NotContraction { .. })
        ));
    }
}

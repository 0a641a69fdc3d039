//! Bundled reference tables used by `--check`.

use crate::csvfmt::read_numeric;

/// James-Stein risk curve (`norm_theta,risk`), dimension 10, with the
/// horizontal axis `||theta|| / sqrt(k)`.
pub const JS_FIGURE: &str = include_str!("../../../reference/js_figure.csv");
/// Ridge SURE landscape, figure convention (`lambda,sure_figure`).
pub const FIGURE2_RIDGE: &str = include_str!("../../../reference/figure2_ridge.csv");
/// Lasso SURE landscape, figure convention. Values at kinks are left limits.
pub const FIGURE2_LASSO: &str = include_str!("../../../reference/figure2_lasso.csv");

/// `(x, y)` pairs of a two-column reference table.
pub fn pairs(text: &str) -> Vec<(f64, f64)> {
    let (_, rows) = read_numeric(text).expect("bundled reference tables are well formed");
    rows.into_iter().map(|r| (r[0], r[1])).collect()
}

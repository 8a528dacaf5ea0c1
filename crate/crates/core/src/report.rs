//! Summaries of a run's `trend.csv`: a text table and an SVG line chart of
//! the survivors' union coverage.

use std::fmt::Write as _;

use crate::evolution::TrendRow;

pub fn trend_table(rows: &[TrendRow]) -> String {
    let mut s = String::from("iteration  union  valid  admitted  weak  invalid\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{:>9}  {:>5}  {:>5}  {:>8}  {:>4}  {:>7}",
            r.iteration, r.survivor_union_size, r.mutants_valid, r.mutants_admitted, r.mutants_discarded_weak, r.mutants_invalid
        );
    }
    s
}

/// Iterations at which the union coverage dropped.
pub fn decreases(rows: &[TrendRow]) -> Vec<u32> {
    rows.windows(2)
        .filter(|w| w[1].survivor_union_size < w[0].survivor_union_size)
        .map(|w| w[1].iteration)
        .collect()
}

/// Line chart of union coverage over iterations.
pub fn trend_svg(rows: &[TrendRow]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 360.0;
    const M: f64 = 48.0;
    let max_x = rows.iter().map(|r| r.iteration).max().unwrap_or(1).max(1) as f64;
    let max_y = rows.iter().map(|r| r.survivor_union_size).max().unwrap_or(1).max(1) as f64;
    let x = |i: f64| M + (W - 2.0 * M) * i / max_x;
    let y = |v: f64| H - M - (H - 2.0 * M) * v / max_y;
    let points: Vec<String> = rows
        .iter()
        .map(|r| format!("{:.1},{:.1}", x(r.iteration as f64), y(r.survivor_union_size as f64)))
        .collect();
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{M},{M} V{} H{}" fill="none" stroke="black"/>"#,
        H - M,
        W - M
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">iteration</text>"#, W / 2.0, H - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {})">survivor union coverage</text>"#,
        H / 2.0,
        H / 2.0
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end" font-size="10">{max_y}</text>"#, M - 4.0, M + 4.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end" font-size="10">0</text>"#, M - 4.0, H - M);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="10">{max_x}</text>"#, W - M, H - M + 14.0);
    let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#1f77b4" stroke-width="2"/>"##, points.join(" "));
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(iteration: u32, u: usize) -> TrendRow {
        TrendRow { iteration, survivor_union_size: u, ..TrendRow::default() }
    }

    #[test]
    fn svg_has_one_point_per_row() {
        let svg = trend_svg(&[row(1, 5), row(2, 9), row(3, 13)]);
        assert!(svg.starts_with("<svg"));
        let pts = svg.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        assert_eq!(pts.split(' ').count(), 3);
    }

    #[test]
    fn decreases_found() {
        assert_eq!(decreases(&[row(1, 5), row(2, 4), row(3, 6)]), vec![2]);
        assert!(decreases(&[row(1, 5), row(2, 5)]).is_empty());
    }
}

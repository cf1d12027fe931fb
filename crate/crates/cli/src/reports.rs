//! CSV and aligned-text renderings of fits, summaries and plot data.

use std::fmt::Write as _;

use setaside_core::domain::SizeClass;
use setaside_core::econometrics::{FitResult, Response, Weighting};
use setaside_core::equilibrium::{EquilibriumModel, EquilibriumSolution};
use setaside_core::simulation::{item_bidders, BidRecord, SummaryTable, TimelinePoint, WinShareReport};

/// `0.5` -> `50%`.
pub fn percent(alpha: f64) -> String {
    let pct = alpha * 100.0;
    if (pct - pct.round()).abs() < 1e-9 {
        format!("{}%", pct.round() as i64)
    } else {
        format!("{pct:.2}%")
    }
}

/// `0.5` -> `sa50`, for file names.
pub fn alpha_slug(alpha: f64) -> String {
    format!("sa{}", percent(alpha).trim_end_matches('%').replace('.', "_"))
}

pub fn response_slug(r: Response) -> &'static str {
    match r {
        Response::NBidders => "n_bidders",
        Response::LogOffer => "log_offer",
        Response::LogWin => "log_win",
    }
}

pub fn weighting_slug(w: Weighting) -> &'static str {
    match w {
        Weighting::Quantity => "quantity",
        Weighting::ProductEqualized => "product_equalized",
        Weighting::Unit => "unit",
    }
}

fn response_title(r: Response) -> &'static str {
    match r {
        Response::NBidders => "Number of bidders by type",
        Response::LogOffer => "Log offer price",
        Response::LogWin => "Log winning price",
    }
}

fn weighting_title(w: Weighting) -> &'static str {
    match w {
        Weighting::Quantity => "WLS (quantity weights)",
        Weighting::ProductEqualized => "WLS (product-equalized weights)",
        Weighting::Unit => "OLS",
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Left-aligned first column, right-aligned others.
pub fn align(rows: &[Vec<String>]) -> String {
    let n = rows.iter().map(Vec::len).max().unwrap_or(0);
    let mut width = vec![0; n];
    for r in rows {
        for (i, c) in r.iter().enumerate() {
            width[i] = width[i].max(c.chars().count());
        }
    }
    let mut out = String::new();
    for r in rows {
        let mut line = String::new();
        for (i, c) in r.iter().enumerate() {
            if i == 0 {
                let _ = write!(line, "{c:<w$}", w = width[0]);
            } else {
                let _ = write!(line, "  {c:>w$}", w = width[i]);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

/// `term,coefficient,robust_se`, one row per design column.
pub fn fit_csv(fit: &FitResult) -> String {
    let mut out = String::from("term,coefficient,robust_se\n");
    for (i, c) in fit.columns.iter().enumerate() {
        let _ = writeln!(out, "{},{},{}", csv_field(c), fit.coefficients[i], fit.robust_se[i]);
    }
    out
}

fn is_fixed_effect(term: &str) -> bool {
    ["Product ", "Year ", "Vendor ", "Package "].iter().any(|p| term.starts_with(p))
}

/// Fits of one response side by side, each as a coefficient / robust error
/// pair. Fixed-effect dummies are left to the CSVs.
pub fn fit_table_text(fits: &[&FitResult]) -> String {
    let Some(first) = fits.first() else { return String::new() };
    let mut terms: Vec<&str> = Vec::new();
    for f in fits {
        for c in &f.columns {
            if !is_fixed_effect(c) && !terms.contains(&c.as_str()) {
                terms.push(c);
            }
        }
    }
    let mut rows = vec![
        std::iter::once(String::new()).chain(fits.iter().flat_map(|f| [weighting_title(f.spec.weighting).to_string(), String::new()])).collect(),
        std::iter::once(String::new()).chain(fits.iter().flat_map(|_| ["Coefficient".to_string(), "Robust Error".to_string()])).collect::<Vec<_>>(),
    ];
    for t in &terms {
        let mut row = vec![t.to_string()];
        for f in fits {
            match (f.coefficient(t), f.robust_se_of(t)) {
                (Some(b), Some(s)) => row.extend([format!("{b:.4}"), format!("{s:.4}")]),
                _ => row.extend([String::new(), String::new()]),
            }
        }
        rows.push(row);
    }
    rows.push(std::iter::once("Observations".to_string()).chain(fits.iter().flat_map(|f| [f.n_obs.to_string(), String::new()])).collect());
    rows.push(std::iter::once("Weighted R^2".to_string()).chain(fits.iter().flat_map(|f| [format!("{:.4}", f.weighted_r2), String::new()])).collect());
    let mut out = format!("{}\n\n", response_title(first.spec.response));
    out.push_str(&align(&rows));
    out.push_str("Fixed-effect coefficients omitted; see the CSV files.\n");
    out
}

pub fn table1_csv(t: &SummaryTable) -> String {
    let mut out = String::from("statistic");
    for h in t.headers() {
        out.push(',');
        out.push_str(&csv_field(&h));
    }
    out.push('\n');
    for (label, cells) in t.rows() {
        out.push_str(&csv_field(&label));
        for c in cells {
            out.push(',');
            out.push_str(&csv_field(&c));
        }
        out.push('\n');
    }
    out
}

pub fn table1_text(t: &SummaryTable) -> String {
    let mut rows = vec![std::iter::once(String::new()).chain(t.headers()).collect::<Vec<_>>()];
    rows.extend(t.rows().into_iter().map(|(l, c)| std::iter::once(l).chain(c).collect()));
    format!("Summary statistics by set-aside level\n\n{}", align(&rows))
}

/// Active vendors per auction date: `x` date, `y` count, `group` size class.
pub fn figure1_csv(timeline: &[TimelinePoint]) -> String {
    let mut out = String::from("x,y,group\n");
    for p in timeline {
        let _ = writeln!(out, "{},{},SMALL", p.date, p.small);
        let _ = writeln!(out, "{},{},LARGE", p.date, p.large);
    }
    out
}

/// Bids per item and size class, grouped by set-aside level.
pub fn figure2_bidders_csv(records: &[BidRecord]) -> String {
    let mut out = String::from("x,y,group,auction_id,item_id\n");
    for it in item_bidders(records) {
        for (size, n) in [(SizeClass::Small, it.small), (SizeClass::Large, it.large)] {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                percent(it.set_aside),
                n,
                size.as_str(),
                csv_field(&it.auction_id),
                csv_field(it.item_id.as_str())
            );
        }
    }
    out
}

/// Share of quantity won per auction, product and size class.
pub fn figure2_shares_csv(report: &WinShareReport) -> String {
    let mut out = String::from("x,y,group,auction_id,product_code\n");
    for c in &report.cells {
        for size in [SizeClass::Small, SizeClass::Large] {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                percent(c.set_aside),
                c.share(size),
                size.as_str(),
                csv_field(&c.auction_id),
                csv_field(c.product_code.as_str())
            );
        }
    }
    out
}

/// Share of total quantity won per set-aside level and size class.
pub fn figure2_totals_csv(report: &WinShareReport) -> String {
    let mut out = String::from("x,y,group\n");
    for a in &report.aggregate {
        let x = percent(a.set_aside);
        let _ = writeln!(out, "{x},{},SMALL", a.share(SizeClass::Small));
        let _ = writeln!(out, "{x},{},LARGE", a.share(SizeClass::Large));
        let _ = writeln!(out, "{x},{},UNAWARDED", a.unawarded_share());
    }
    out
}

pub fn win_share_text(report: &WinShareReport) -> String {
    let mut rows = vec![["Set-aside", "Total lbs", "Small share", "Large share", "Unawarded"].map(String::from).to_vec()];
    for a in &report.aggregate {
        rows.push(vec![
            percent(a.set_aside),
            a.total_lbs.to_string(),
            format!("{:.2}", a.share(SizeClass::Small)),
            format!("{:.2}", a.share(SizeClass::Large)),
            format!("{:.2}", a.unawarded_share()),
        ]);
    }
    format!("Share of quantity won\n\n{}", align(&rows))
}

/// Price grid with inverse bids and derivatives, plus bid functions on an
/// equally spaced cost grid of the same length. The large bidder's columns
/// are empty under a full set-aside.
pub fn equilibrium_csv(model: &EquilibriumModel, sol: &EquilibriumSolution) -> String {
    let (lo, hi) = model.support();
    let n = sol.price_grid.len();
    let large = sol.alpha < 1.0;
    let mut out = String::from("p,c1,c2,dc1,dc2,v,b1,b2\n");
    for i in 0..n {
        let v = if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
        let (c2, dc2, b2) = if large {
            (sol.c2[i].to_string(), sol.dc2[i].to_string(), sol.bid(SizeClass::Large, v).to_string())
        } else {
            (String::new(), String::new(), String::new())
        };
        let _ = writeln!(
            out,
            "{},{},{c2},{},{dc2},{v},{},{b2}",
            sol.price_grid[i],
            sol.c1[i],
            sol.dc1[i],
            sol.bid(SizeClass::Small, v)
        );
    }
    out
}

pub fn equilibrium_text(sol: &EquilibriumSolution) -> String {
    let d = &sol.diagnostics;
    let rows = vec![
        vec!["Set-aside".to_string(), percent(sol.alpha)],
        vec!["Lowest bid b_low".to_string(), format!("{:.6}", sol.b_low)],
        vec!["Grid points".to_string(), sol.price_grid.len().to_string()],
        vec!["Max FOC residual".to_string(), format!("{:.3e}", d.max_foc_residual)],
        vec!["Boundary mismatch".to_string(), format!("{:.3e}", d.boundary_mismatch)],
        vec!["Shooting iterations".to_string(), d.shooting_iterations.to_string()],
    ];
    align(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use setaside_core::econometrics::{HcFlavor, RegressionSpec};
    use setaside_core::Matrix;

    fn fit(columns: &[&str]) -> FitResult {
        let k = columns.len();
        FitResult {
            spec: RegressionSpec { response: Response::LogOffer, terms: Vec::new(), weighting: Weighting::Quantity, hc: HcFlavor::Hc1 },
            columns: columns.iter().map(|c| c.to_string()).collect(),
            coefficients: (0..k).map(|i| i as f64 * 0.5).collect(),
            robust_se: vec![0.1; k],
            covariance: Matrix::zeros(k, k),
            n_obs: 10,
            weighted_r2: 0.5,
        }
    }

    #[test]
    fn fit_with_three_terms_has_three_rows() {
        let csv = fit_csv(&fit(&["Constant", "Small", "SA50%, Small"]));
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "term,coefficient,robust_se");
        assert_eq!(lines[3], "\"SA50%, Small\",1,0.1");
    }

    #[test]
    fn text_tables_hide_fixed_effects() {
        let t = fit_table_text(&[&fit(&["Constant", "Small", "Product X", "Year 2015"])]);
        assert!(t.contains("Coefficient") && t.contains("Robust Error"));
        assert!(t.contains("Small") && !t.contains("Year 2015"));
    }

    #[test]
    fn percent_labels() {
        assert_eq!(percent(0.5), "50%");
        assert_eq!(percent(1.0), "100%");
        assert_eq!(percent(0.125), "12.50%");
        assert_eq!(alpha_slug(0.0), "sa0");
        assert_eq!(alpha_slug(0.125), "sa12_50");
    }

    #[test]
    fn alignment_pads_columns() {
        let s = align(&[vec!["a".into(), "1".into()], vec!["bbb".into(), "22".into()]]);
        assert_eq!(s, "a     1\nbbb  22\n");
    }
}

//! Stages shared by the subcommands, and the full pipeline.

use std::path::Path;

use rayon::prelude::*;

use setaside_core::domain::SizeClass;
use setaside_core::econometrics::{
    estimate, join_covariates, FitResult, RegressionSpec, Response, UsdaPrice, WholesalePrice,
};
use setaside_core::equilibrium::{best_response_gap, solve_equilibrium, EquilibriumModel, EquilibriumSolution};
use setaside_core::simulation::{
    bidder_pool_timeline, summary_statistics, win_share_report, BidRecord, Campaign, SimConfig,
};

use crate::artifacts::{ArtifactWriter, Manifest};
use crate::config::{EquilibriumSection, PipelineConfig, RegressionSelection};
use crate::csv_io::{self, BidTable, Schema};
use crate::error::{CliError, StageExt};
use crate::reports;

/// Which optional renderings accompany the CSVs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Formats {
    pub text: bool,
    pub plots: bool,
}

pub struct SimOutput {
    pub records: Vec<BidRecord>,
    pub wholesale: Vec<WholesalePrice>,
    pub usda: Vec<UsdaPrice>,
}

/// Auctions run in parallel; each uses its own RNG stream, so the merged
/// output does not depend on the thread count.
pub fn simulate(cfg: &SimConfig) -> Result<SimOutput, CliError> {
    let campaign = Campaign::new(cfg)?;
    let per_auction: Vec<Vec<BidRecord>> =
        (0..cfg.n_auctions).into_par_iter().map(|i| campaign.auction(i)).collect::<Result<_, _>>()?;
    log::info!("simulated {} auctions", cfg.n_auctions);
    Ok(SimOutput {
        records: per_auction.into_iter().flatten().collect(),
        wholesale: campaign.wholesale_table(),
        usda: campaign.usda_table(),
    })
}

pub fn solve_equilibria(section: &EquilibriumSection) -> Result<Vec<(EquilibriumModel, EquilibriumSolution)>, CliError> {
    section
        .alphas
        .par_iter()
        .map(|&alpha| {
            let model = EquilibriumModel::new(alpha, section.small_cost.clone(), section.large_cost.clone());
            let sol = solve_equilibrium(&model, section.grid_size, section.tolerance)
                .map_err(|e| CliError::from(e).context(&format!("set-aside {}", reports::percent(alpha))))?;
            Ok((model, sol))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Verification {
    pub alpha: f64,
    pub max_foc_residual: f64,
    pub gap_small: f64,
    pub gap_large: f64,
}

pub const FOC_LIMIT: f64 = 1e-6;
pub const GAP_LIMIT: f64 = 0.005;

impl Verification {
    pub fn passed(&self) -> bool {
        self.max_foc_residual <= FOC_LIMIT && self.gap_small <= GAP_LIMIT && self.gap_large <= GAP_LIMIT
    }
}

/// FOC residual and the worst best-response gap over 20 cost quantiles per type.
pub fn verify(model: &EquilibriumModel, sol: &EquilibriumSolution) -> Verification {
    let worst = |size: SizeClass| {
        let dist = if size == SizeClass::Small { &model.f1 } else { &model.f2 };
        (0..20)
            .map(|k| best_response_gap(model, sol, dist.quantile((k as f64 + 0.5) / 20.0), size, 4001))
            .fold(0.0, f64::max)
    };
    Verification {
        alpha: sol.alpha,
        max_foc_residual: sol.diagnostics.max_foc_residual,
        gap_small: worst(SizeClass::Small),
        gap_large: if sol.alpha < 1.0 { worst(SizeClass::Large) } else { 0.0 },
    }
}

pub fn verification_csv(rows: &[Verification]) -> String {
    let mut out = String::from("alpha,max_foc_residual,gap_small,gap_large,passed\n");
    for v in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            v.alpha,
            v.max_foc_residual,
            v.gap_small,
            v.gap_large,
            v.passed()
        ));
    }
    out
}

pub fn write_equilibria(
    w: &mut ArtifactWriter,
    solved: &[(EquilibriumModel, EquilibriumSolution)],
    formats: Formats,
) -> Result<(), CliError> {
    for (model, sol) in solved {
        let slug = reports::alpha_slug(sol.alpha);
        w.write(&format!("equilibrium_{slug}.csv"), reports::equilibrium_csv(model, sol).as_bytes())?;
        if formats.text {
            w.write(&format!("equilibrium_{slug}.txt"), reports::equilibrium_text(sol).as_bytes())?;
        }
    }
    Ok(())
}

/// Bids from a file, with covariates re-joined when price tables are given.
pub fn load_bids(
    bids: &Path,
    wholesale: Option<&Path>,
    usda: Option<&Path>,
    schema: Schema,
) -> Result<BidTable, CliError> {
    let mut table = csv_io::load_bids_csv(bids, schema)?;
    log::info!("loaded {} bids from {}", table.records.len(), bids.display());
    if wholesale.is_some() || usda.is_some() {
        let (Some(wp), Some(up)) = (wholesale, usda) else {
            return Err(CliError::validation("wholesale and usda price files must be given together"));
        };
        let ws = csv_io::load_wholesale_csv(wp)?;
        let us = csv_io::load_usda_csv(up)?;
        join_covariates(&mut table.records, &ws, &us)?;
    }
    Ok(table)
}

pub fn write_bids(w: &mut ArtifactWriter, sim: &SimOutput) -> Result<(), CliError> {
    let table = BidTable { records: sim.records.clone(), ..Default::default() };
    let io = |e: csv::Error| CliError::validation(e.to_string());
    w.write_with("bids.csv", |buf| csv_io::write_bids(buf, &table).map_err(io))?;
    w.write_with("wholesale.csv", |buf| csv_io::write_rows(buf, &sim.wholesale).map_err(io))?;
    w.write_with("usda_prices.csv", |buf| csv_io::write_rows(buf, &sim.usda).map_err(io))?;
    Ok(())
}

/// Summary table, win shares and plot data.
pub fn write_reports(w: &mut ArtifactWriter, records: &[BidRecord], formats: Formats) -> Result<(), CliError> {
    if records.is_empty() {
        return Err(CliError::validation("no bids to summarize"));
    }
    let table = summary_statistics(records);
    let shares = win_share_report(records);
    w.write("table1.csv", reports::table1_csv(&table).as_bytes())?;
    if formats.text {
        w.write("table1.txt", reports::table1_text(&table).as_bytes())?;
        w.write("win_shares.txt", reports::win_share_text(&shares).as_bytes())?;
    }
    if formats.plots {
        w.write("figure1_active_bidders.csv", reports::figure1_csv(&bidder_pool_timeline(records)).as_bytes())?;
        w.write("figure2_bidders_per_item.csv", reports::figure2_bidders_csv(records).as_bytes())?;
        w.write("figure2_win_shares.csv", reports::figure2_shares_csv(&shares).as_bytes())?;
        w.write("figure2_total_shares.csv", reports::figure2_totals_csv(&shares).as_bytes())?;
    }
    Ok(())
}

fn spec_for(response: Response, sel: &RegressionSelection, weighting: setaside_core::econometrics::Weighting) -> RegressionSpec {
    let mut spec = match response {
        Response::NBidders => RegressionSpec::n_bidders(weighting),
        Response::LogOffer => RegressionSpec::log_offer(weighting),
        Response::LogWin => RegressionSpec::log_win(weighting),
    };
    spec.hc = sel.hc;
    spec
}

/// Every selected response under every selected weighting, response-major.
pub fn run_regressions(records: &[BidRecord], sel: &RegressionSelection) -> Result<Vec<FitResult>, CliError> {
    let specs: Vec<RegressionSpec> = sel
        .responses
        .iter()
        .flat_map(|&r| sel.weightings.iter().map(move |&w| spec_for(r, sel, w)))
        .collect();
    specs
        .par_iter()
        .map(|spec| {
            estimate(records, spec).map_err(|e| {
                let name = format!("{}/{}", reports::response_slug(spec.response), reports::weighting_slug(spec.weighting));
                CliError::from(e).context(&name)
            })
        })
        .collect()
}

pub fn write_regressions(w: &mut ArtifactWriter, fits: &[FitResult], formats: Formats) -> Result<(), CliError> {
    for f in fits {
        let name = format!("fit_{}_{}.csv", reports::response_slug(f.spec.response), reports::weighting_slug(f.spec.weighting));
        w.write(&name, reports::fit_csv(f).as_bytes())?;
    }
    if formats.text {
        let mut responses: Vec<Response> = Vec::new();
        for f in fits {
            if !responses.contains(&f.spec.response) {
                responses.push(f.spec.response);
            }
        }
        for r in responses {
            let group: Vec<&FitResult> = fits.iter().filter(|f| f.spec.response == r).collect();
            w.write(&format!("table_{}.txt", reports::response_slug(r)), reports::fit_table_text(&group).as_bytes())?;
        }
    }
    Ok(())
}

/// Equilibria, simulation (or loaded bids), reports and regressions, then the
/// manifest. On error every artifact written so far is removed.
pub fn run_pipeline(cfg: &PipelineConfig, out_dir: &Path, schema: Schema, formats: Formats) -> Result<Manifest, CliError> {
    cfg.validate().stage("config")?;
    let mut w = ArtifactWriter::create(out_dir)?;

    let solved = solve_equilibria(&cfg.equilibrium).stage("equilibrium")?;
    write_equilibria(&mut w, &solved, formats).stage("equilibrium")?;

    let records = match &cfg.paths.bids {
        Some(bids) => {
            let table = load_bids(bids, cfg.paths.wholesale.as_deref(), cfg.paths.usda.as_deref(), schema).stage("load")?;
            table.records
        }
        None => {
            let sim = simulate(&cfg.simulation).stage("simulate")?;
            write_bids(&mut w, &sim).stage("simulate")?;
            sim.records
        }
    };

    write_reports(&mut w, &records, formats).stage("report")?;
    let fits = run_regressions(&records, &cfg.regressions).stage("regress")?;
    write_regressions(&mut w, &fits, formats).stage("regress")?;
    let manifest = w.finish()?;
    log::info!("pipeline wrote {} artifacts to {}", manifest.artifacts.len(), out_dir.display());
    Ok(manifest)
}

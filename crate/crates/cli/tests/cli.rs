use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chrono::NaiveDate;
use proptest::prelude::*;
use tempfile::TempDir;

use setaside_cli::config::PipelineConfig;
use setaside_cli::csv_io::{self, BidTable, Schema};
use setaside_core::allocation::AllocationProblem;
use setaside_core::domain::{
    Bid, CapacityConstraint, Destination, Item, Price, SetAsidePolicy, SizeClass, Solicitation, Vendor, WindowKey,
};
use setaside_core::simulation::{win_share_report, BidRecord};

fn setaside(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_setaside")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn small_config(dir: &Path) -> PathBuf {
    let mut cfg = PipelineConfig::default_for(5);
    cfg.simulation.n_auctions = 48;
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn files_in(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = match fs::read_dir(dir) {
        Ok(rd) => rd.map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect(),
        Err(_) => Vec::new(),
    };
    names.sort();
    names
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn pipeline_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = setaside(&["--config", s(&cfg), "--out-dir", s(out), "pipeline"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let names = files_in(&a);
    assert_eq!(names, files_in(&b));
    assert!(names.contains(&"manifest.json".to_string()) && names.contains(&"fit_log_offer_quantity.csv".to_string()));
    for n in &names {
        assert_eq!(fs::read(a.join(n)).unwrap(), fs::read(b.join(n)).unwrap(), "{n} differs");
    }
}

#[test]
fn equilibrium_solve_writes_one_csv_per_alpha() {
    let tmp = TempDir::new().unwrap();
    let o = setaside(&["--out-dir", s(tmp.path()), "equilibrium", "solve", "--alpha", "0", "--alpha", "0.5", "--alpha", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for slug in ["sa0", "sa50", "sa100"] {
        let csv = fs::read_to_string(tmp.path().join(format!("equilibrium_{slug}.csv"))).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("p,c1,c2,dc1,dc2,v,b1,b2"));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 8);
        // no large bidder in a full set-aside
        assert_eq!(row[2].is_empty(), slug == "sa100");
    }
}

#[test]
fn equilibrium_verify_passes_at_default_settings() {
    let tmp = TempDir::new().unwrap();
    let o = setaside(&["--out-dir", s(tmp.path()), "equilibrium", "verify", "--alpha", "0.5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS"));
    assert!(tmp.path().join("equilibrium_verify.csv").exists());
}

#[test]
fn unknown_config_key_is_a_validation_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path());
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&cfg).unwrap()).unwrap();
    v["output"]["colour"] = true.into();
    fs::write(&cfg, v.to_string()).unwrap();
    let o = setaside(&["--config", s(&cfg), "--out-dir", s(&tmp.path().join("out")), "pipeline"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
}

#[test]
fn wrong_schema_version_is_a_validation_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path());
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&cfg).unwrap()).unwrap();
    v["schema_version"] = 2.into();
    fs::write(&cfg, v.to_string()).unwrap();
    let o = setaside(&["--config", s(&cfg), "--out-dir", s(&tmp.path().join("out")), "pipeline"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn missing_bids_file_is_an_io_error() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("nope.csv");
    let o = setaside(&["--out-dir", s(&tmp.path().join("out")), "regress", "--bids", s(&missing)]);
    assert_eq!(code(&o), 3);
}

#[test]
fn unreachable_tolerance_is_a_solver_error() {
    let tmp = TempDir::new().unwrap();
    let o = setaside(&["--out-dir", s(tmp.path()), "equilibrium", "solve", "--alpha", "0.5", "--tolerance", "1e-300"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(files_in(tmp.path()).is_empty());
}

fn record(auction: &str, item: &str, vendor: &str, size: SizeClass, price: u64, won: bool) -> BidRecord {
    let d = NaiveDate::from_ymd_opt(2019, 3, 5).unwrap();
    BidRecord {
        auction_id: auction.into(),
        date: d,
        solicitation_id: format!("SOL-{auction}").into(),
        product_code: "BEEF FINE GROUND FRZ CTN-40 LB".into(),
        package_class: "CTN-40".into(),
        item_id: item.into(),
        quantity_lbs: 40_000,
        destination_state: "IA".into(),
        window_start: NaiveDate::from_ymd_opt(2019, 4, 1).unwrap(),
        window_end: NaiveDate::from_ymd_opt(2019, 4, 14).unwrap(),
        vendor_id: vendor.into(),
        vendor_type: size,
        sdvosb: false,
        price_per_lb: Price::from_ten_thousandths(price),
        won,
        set_aside: 0.5,
        demand_mlbs: 0.04,
        n_bidders_item: 1,
        wholesale_price: 2.05,
        usda_ref_price: 2.5,
    }
}

#[test]
fn failed_pipeline_leaves_no_artifacts() {
    let tmp = TempDir::new().unwrap();
    let bids = tmp.path().join("bids.csv");
    let rows = vec![
        record("A1", "I1", "V1", SizeClass::Small, 21_000, true),
        record("A1", "I2", "V2", SizeClass::Large, 20_500, true),
    ];
    csv_io::write_bids_csv(&bids, &rows).unwrap();
    let cfg_path = small_config(tmp.path());
    let mut cfg: PipelineConfig = serde_json::from_str(&fs::read_to_string(&cfg_path).unwrap()).unwrap();
    cfg.paths.bids = Some(bids);
    fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();

    let out = tmp.path().join("out");
    let o = setaside(&["--config", s(&cfg_path), "--out-dir", s(&out), "pipeline"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("regress"));
    assert!(files_in(&out).is_empty(), "left behind: {:?}", files_in(&out));
}

fn worked_example() -> AllocationProblem {
    let date = |m, d| NaiveDate::from_ymd_opt(2019, m, d).unwrap();
    let items: Vec<Item> = (1..=4)
        .map(|i| Item {
            item_id: format!("FGB-{i}").into(),
            solicitation_id: "S1".into(),
            product_code: "FGB".into(),
            quantity_lbs: 40_000,
            destination: Destination { city: "Ames".into(), state: "IA".into(), zip: "50010".into() },
            window_start: date(4, 1),
            window_end: date(4, 14),
        })
        .collect();
    let mut bids = Vec::new();
    for it in &items {
        for (v, p) in [("L", 20_000), ("S1", 21_000), ("S2", 22_000)] {
            bids.push(Bid { vendor_id: v.into(), item_id: it.item_id.clone(), price_per_lb: Price::from_ten_thousandths(p) });
        }
    }
    let truck = |v: &str| CapacityConstraint {
        vendor_id: v.into(),
        products: vec!["FGB".into()],
        window_key: WindowKey::Any,
        max_quantity_lbs: 40_000,
    };
    AllocationProblem {
        solicitation: Solicitation {
            solicitation_id: "S1".into(),
            auction_date: date(3, 1),
            items,
            policies: vec![SetAsidePolicy::new("FGB", 0.5)],
        },
        bids,
        vendors: vec![
            Vendor { vendor_id: "L".into(), size_class: SizeClass::Large, sdvosb: false },
            Vendor { vendor_id: "S1".into(), size_class: SizeClass::Small, sdvosb: false },
            Vendor { vendor_id: "S2".into(), size_class: SizeClass::Small, sdvosb: false },
        ],
        capacities: vec![truck("S1"), truck("S2")],
        price_ceiling: BTreeMap::new(),
    }
}

#[test]
fn allocate_solvers_agree_on_the_worked_example() {
    let tmp = TempDir::new().unwrap();
    let problem = tmp.path().join("problem.json");
    fs::write(&problem, serde_json::to_string(&worked_example()).unwrap()).unwrap();
    let mut results = Vec::new();
    for (dir, flag) in [("fast", None), ("oracle", Some("--brute-force"))] {
        let out = tmp.path().join(dir);
        let mut args = vec!["--out-dir", s(&out), "allocate", s(&problem)];
        args.extend(flag);
        let o = setaside(&args);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("allocation.json")).unwrap()).unwrap();
        results.push(v);
    }
    assert_eq!(results[0], results[1]);
    let awards = results[0]["awards"].as_object().unwrap();
    let small = awards.values().filter(|a| a["vendor_id"] != "L").count();
    assert_eq!((awards.len(), small), (4, 2));
    assert_eq!(results[0]["quota_report"][0]["quota_met"], true);

    let out = tmp.path().join("feasible");
    let o = setaside(&["--out-dir", s(&out), "allocate", "--feasibility", s(&problem)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("feasibility.json").exists());
}

#[test]
fn extra_columns_are_rejected_strictly_and_kept_laxly() {
    let tmp = TempDir::new().unwrap();
    let plain = tmp.path().join("plain.csv");
    let rows: Vec<BidRecord> = (0..6)
        .map(|i| {
            let size = if i % 2 == 0 { SizeClass::Small } else { SizeClass::Large };
            record("A1", &format!("I{}", i / 2), &format!("V{}", i % 2), size, 20_000 + 100 * i, i % 2 == 0)
        })
        .collect();
    csv_io::write_bids_csv(&plain, &rows).unwrap();
    let text = fs::read_to_string(&plain).unwrap();
    let mut extended = String::new();
    for (i, line) in text.lines().enumerate() {
        extended.push_str(line);
        extended.push_str(if i == 0 { ",note\n" } else { ",x\n" });
    }
    let bids = tmp.path().join("extended.csv");
    fs::write(&bids, extended).unwrap();

    let o = setaside(&["--strict", "--out-dir", s(&tmp.path().join("strict")), "report", "--bids", s(&bids)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("note"));

    let lax = tmp.path().join("lax");
    let o = setaside(&["--lax", "--out-dir", s(&lax), "report", "--bids", s(&bids)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let normalized = fs::read_to_string(lax.join("bids_normalized.csv")).unwrap();
    assert!(normalized.lines().next().unwrap().ends_with(",note"));
    assert_eq!(normalized.lines().count(), 7);
}

#[test]
fn figure2_has_two_rows_per_cell() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().join("out");
    let o = setaside(&["--config", s(&cfg), "--out-dir", s(&out), "pipeline"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let records = csv_io::load_bids_csv(&out.join("bids.csv"), Schema::Strict).unwrap().records;
    let cells = win_share_report(&records).cells.len();
    let figure = fs::read_to_string(out.join("figure2_win_shares.csv")).unwrap();
    assert_eq!(figure.lines().count() - 1, 2 * cells);
}

fn arb_record() -> impl Strategy<Value = BidRecord> {
    (
        0u64..500_000,
        1u64..80_000,
        any::<bool>(),
        any::<bool>(),
        prop::sample::select(vec![0.0, 0.5, 1.0]),
        1u32..30,
        "[A-Z]([A-Z0-9 ,\"-]{0,10}[A-Z0-9])?",
    )
        .prop_map(|(price, qty, small, won, alpha, n, code)| {
            let mut r = record("A7", "I3", "V9", if small { SizeClass::Small } else { SizeClass::Large }, price, won);
            r.quantity_lbs = qty;
            r.set_aside = alpha;
            r.n_bidders_item = n;
            r.product_code = code.as_str().into();
            r.demand_mlbs = qty as f64 / 1e6;
            r
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bids_survive_a_write_and_load(rows in prop::collection::vec(arb_record(), 1..20)) {
        let tmp = TempDir::new().unwrap();
        let path = tmp.path().join("bids.csv");
        let mut buf = Vec::new();
        csv_io::write_bids(&mut buf, &BidTable { records: rows.clone(), ..Default::default() }).unwrap();
        fs::write(&path, &buf).unwrap();
        let back = csv_io::load_bids_csv(&path, Schema::Strict).unwrap();
        prop_assert_eq!(back.records, rows);
    }
}

#[test]
fn printed_config_is_the_default_with_the_seed_applied() {
    let o = setaside(&["--seed", "11", "config"]);
    assert_eq!(code(&o), 0);
    let cfg: PipelineConfig = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(cfg, PipelineConfig::default_for(11));
}

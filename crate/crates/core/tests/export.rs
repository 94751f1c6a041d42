use fogalloc::config::{LoadRange, RunConfig};
use fogalloc::harness::{compare, export_comparison_csv, export_json, read_json, savings, Comparison};

fn small() -> RunConfig {
    RunConfig { load_range: LoadRange { min: 6.0, max: 12.0, step: 3.0 }, ..Default::default() }
}

#[test]
fn comparison_json_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let c = compare(&small()).unwrap();
    let path = dir.path().join("nested/comparison.json");
    export_json(&c, &path).unwrap();
    let back: Comparison = read_json(&path).unwrap();
    assert_eq!(back, c);
}

#[test]
fn comparison_csv_savings_follow_from_totals() {
    let dir = tempfile::tempdir().unwrap();
    let c = compare(&small()).unwrap();
    let path = export_comparison_csv(&c.rows, dir.path()).unwrap();
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let mut n = 0;
    for rec in r.records() {
        let rec = rec.unwrap();
        let v = |name: &str| rec[col(name)].parse::<f64>().unwrap();
        // savings recomputed from the rounded totals agree to formatting precision
        assert!((v("savings_vs_sl") - (1.0 - v("pon_total_w") / v("sl_total_w"))).abs() < 1e-5);
        assert!((v("savings_vs_cloud") - (1.0 - v("pon_total_w") / v("cloud_total_w"))).abs() < 1e-5);
        assert!((v("network_savings_vs_sl") - (1.0 - v("pon_network_w") / v("sl_network_w"))).abs() < 1e-5);
        assert!(v("savings_vs_sl") < 1.0 && v("savings_vs_cloud") < 1.0);
        n += 1;
    }
    assert_eq!(n, 3);
}

#[test]
fn maxima_are_row_maxima() {
    let c = compare(&small()).unwrap();
    let m = c.max_savings.unwrap();
    let best = c.rows.iter().map(|r| savings(r.pon_total_w, r.sl_total_w)).fold(f64::MIN, f64::max);
    assert_eq!(m.total_vs_sl.value, best);
    assert!(c.rows.iter().any(|r| r.per_task_load == m.total_vs_sl.per_task_load));
}

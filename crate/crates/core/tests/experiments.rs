use rwrp_core::experiments::{emit_outputs, run, run_document, ExperimentConfig, RUN_SCHEMA};

fn config(body: &str, dir: &std::path::Path) -> ExperimentConfig {
    let text = format!("{body}\n[output]\ndir = {:?}\n", dir.display().to_string());
    ExperimentConfig::from_toml(&text).unwrap()
}

const PERIODIC_LINE: &str = r#"
[geometry]
dim = 1
steps = [[1], [2]]

[environment]
kind = "periodic"
period = [3]
table = [0.0, 1.0, -0.5]

[potential]
kind = "site"
beta = 1.0
"#;

const IID_SPACE_TIME: &str = r#"
seed = 3

[geometry]
dim = 2
steps = [[0, 1], [1, 1]]

[environment]
kind = "iid"
marginal = { kind = "bernoulli", p = 0.5, low = -1.0, high = 1.0 }
"#;

fn header(path: &std::path::Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn validate(doc: &serde_json::Value) {
    let schema: serde_json::Value = serde_json::from_str(RUN_SCHEMA).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
}

fn emit(cfg: &ExperimentConfig) -> (Vec<std::path::PathBuf>, serde_json::Value) {
    let out = run(cfg).unwrap();
    let resolved = cfg.resolved().unwrap();
    let paths = emit_outputs(&out, &resolved, None).unwrap();
    let json = paths.iter().find(|p| p.extension().unwrap() == "json").unwrap();
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    validate(&doc);
    (paths, doc)
}

#[test]
fn dp_run_matches_perron_and_declares_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        &format!("{PERIODIC_LINE}\n[experiment]\nkind = \"dp\"\nn_schedule = [100, 200, 400]\ntolerance = 1e-3\n"),
        dir.path(),
    );
    let (paths, doc) = emit(&cfg);
    assert_eq!(header(&paths[0]), "n,logZ,F_over_n");
    assert_eq!(doc["passed"], true);
    assert_eq!(doc["config"]["output"]["prefix"], "dp");
}

#[test]
fn duality_run_columns_and_cross_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        &format!("{PERIODIC_LINE}\n[experiment]\nkind = \"duality\"\nzetas = [\"5/4\", \"3/2\", \"7/4\"]\nn_schedule = [50, 100, 200, 400]\n"),
        dir.path(),
    );
    let (paths, doc) = emit(&cfg);
    assert_eq!(header(&paths[0]), "zeta_0,lambda_usc,I,err");
    assert_eq!(doc["passed"], true, "{}", doc["checks"]);
}

#[test]
fn rate_run_on_free_walk_is_cramer() {
    let dir = tempfile::tempdir().unwrap();
    let body = "[geometry]\ndim = 1\nsteps = [[1], [2]]\n[potential]\nkind = \"zero\"\n\
                [experiment]\nkind = \"rate\"\nzeta_grid = 8\nn_schedule = [10, 20]\n";
    let out = run(&config(body, dir.path())).unwrap();
    assert!(out.passed(), "{:?}", out.checks);
    let rows = &out.table.unwrap().rows;
    let mid = rows.iter().find(|r| r[0] == 1.5).unwrap();
    assert!(mid[2].abs() < 1e-12);
}

#[test]
fn concentration_run_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        &format!(
            "{IID_SPACE_TIME}\n[experiment]\nkind = \"concentration\"\nzeta = \"1, 1\"\nsamples = 200\n\
             n_schedule = [20, 40, 60, 80]\nepsilon = 0.1\n"
        ),
        dir.path(),
    );
    let (paths, doc) = emit(&cfg);
    assert_eq!(header(&paths[0]), "n,tail_freq,fit_envelope");
    assert!(doc["metrics"]["caveat"].as_str().unwrap().contains("existential"));
}

#[test]
fn continuity_scan_on_free_walk() {
    let dir = tempfile::tempdir().unwrap();
    let body = "[geometry]\ndim = 1\nsteps = [[1], [2]]\n[potential]\nkind = \"zero\"\n\
                [experiment]\nkind = \"continuity\"\nzeta_grid = 4\nn_schedule = [50, 100, 200]\n";
    let (paths, doc) = emit(&config(body, dir.path()));
    assert_eq!(header(&paths[0]), "zeta_0,lambda,err,face_dim");
    assert!(doc["metrics"]["max_concavity_residual"].as_f64().unwrap() < 1e-3);
    // extreme points: a single path, so Λ = log(1/2)
    let text = std::fs::read_to_string(&paths[0]).unwrap();
    let first: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    assert!((first[1] - 0.5f64.ln()).abs() < 1e-12);
}

#[test]
fn entropy_run_matches_perron() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&format!("{PERIODIC_LINE}\n[experiment]\nkind = \"entropy\"\nzeta = \"8/5\"\n"), dir.path());
    let (paths, doc) = emit(&cfg);
    assert_eq!(header(&paths[0]), "state,step,nu,doob_nu");
    assert_eq!(doc["passed"], true, "{}", doc["checks"]);
}

#[test]
fn geometry_run_has_no_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&format!("{IID_SPACE_TIME}\n[experiment]\nkind = \"geometry\"\n"), dir.path());
    let (paths, doc) = emit(&cfg);
    assert_eq!(paths.len(), 1);
    assert_eq!(doc["metrics"]["strictly_directed"], true);
    assert!(doc["csv"].is_null());
}

#[test]
fn outputs_are_byte_identical_across_runs_and_threads() {
    let body = format!(
        "{IID_SPACE_TIME}\n[experiment]\nkind = \"concentration\"\nzeta = \"1/2, 1\"\nsamples = 40\n\
         n_schedule = [10, 20, 30]\n"
    );
    let mut texts = Vec::new();
    for threads in [1, 3] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(&body, dir.path());
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let paths = pool.install(|| emit(&cfg).0);
        let mut bytes: Vec<Vec<u8>> = paths.iter().map(|p| std::fs::read(p).unwrap()).collect();
        // the output directory is part of the embedded config
        let json = String::from_utf8(bytes.pop().unwrap()).unwrap().replace(&dir.path().display().to_string(), "DIR");
        bytes.push(json.into_bytes());
        texts.push(bytes);
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn timing_only_when_requested() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&format!("{IID_SPACE_TIME}\n[experiment]\nkind = \"geometry\"\n"), dir.path());
    let out = run(&cfg).unwrap();
    let resolved = cfg.resolved().unwrap();
    assert!(run_document(&out, &resolved, None, None).unwrap().get("wall_ms").is_none());
    let doc = run_document(&out, &resolved, None, Some(12)).unwrap();
    assert_eq!(doc["wall_ms"], 12);
    validate(&doc);
}

#[test]
fn unbounded_concentration_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let body = "[geometry]\ndim = 2\nsteps = [[0, 1], [1, 1]]\n\
                [environment]\nkind = \"iid\"\nmarginal = { kind = \"gaussian\", mean = 0.0, std_dev = 1.0 }\n\
                [experiment]\nkind = \"concentration\"\n";
    assert!(run(&config(body, dir.path())).is_err());
}

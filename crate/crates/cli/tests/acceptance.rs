//! End-to-end acceptance run over the shipped configs.
//!
//! Each criterion runs its command through the library entry point, then
//! re-derives the verdict from the written CSV and JSON files instead of
//! trusting the manifest alone. One line per criterion is printed; the
//! process exits nonzero if any criterion fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use arrowlab::friction::{self, FrictionModel};
use arrowlab_cli::{run_config_file, Command, Outcome, Status};
use serde_json::Value;

const SEED: u64 = 0;

// Criterion 1
const ENTROPY_INSTANCES: usize = 1000;
const KLEIN_FLOOR: f64 = -1e-10;
const RELATIVE_FLOOR: f64 = -1e-10;
const SSA_FLOOR: f64 = -1e-9;
const MONOTONE_FLOOR: f64 = -1e-9;
const CONVEXITY_CEILING: f64 = 1e-9;
const ENTROPY_LIMIT: Duration = Duration::from_secs(60);

// Criteria 2 and 3
const BALANCE_TOLERANCE: f64 = 1e-3;
const REL_ENTROPY_FLOOR: f64 = -1e-10;
const HOT_TEMPERATURE: f64 = 2.0;
const COLD_TEMPERATURE: f64 = 1.0;
const EVOLVE_LIMIT: Duration = Duration::from_secs(120);

// Criterion 4
const CARNOT_SLACK: f64 = 0.02;
const CYCLE_ENTROPY_FLOOR: f64 = -1e-6;
const CARNOT_LIMIT: Duration = Duration::from_secs(300);

// Criterion 5
const SLOW_FACTOR: f64 = 10.0;
const SWEEP_LIMIT: Duration = Duration::from_secs(300);

// Criterion 6
const MSD_R2_MIN: f64 = 0.99;
const WINDOW_TAU: (f64, f64) = (10.0, 100.0);
const GK_TOLERANCE: f64 = 0.05;
const MIN_PATHS: usize = 10_000;
const RATIO_RANGE: (f64, f64) = (3.2, 4.8);
const QBM_LIMIT: Duration = Duration::from_secs(600);

// Criterion 7
const BRANCH_FRACTION: f64 = 0.5;
const NO_SOLUTION_FRACTION: f64 = 1.2;
const BRANCH_FORCE_TOLERANCE: f64 = 1e-3;
const STATICS_LIMIT: Duration = Duration::from_secs(300);

// Criterion 8
const DECAY_RANGE: (f64, f64) = (-1.3, -0.4);
const TRANSIENT_END: f64 = 20.0;
const MEMORY_AGREEMENT: f64 = 0.01;
const DYNAMICS_LIMIT: Duration = Duration::from_secs(900);

// Criterion 9
const SUBSONIC_FRACTION: f64 = 0.8;
const SUPERSONIC_FRACTION: f64 = 1.5;
const NOISE_FRACTION: f64 = 1e-3;
const SIGNAL_FACTOR: f64 = 10.0;
const SUBSONIC_LIMIT: Duration = Duration::from_secs(120);

// Criterion 10
const PARTITION_TOLERANCE: f64 = 1e-10;
const BORN_Z_MAX: f64 = 3.0;
const MIN_HISTORIES: u64 = 10_000;
const ETH_LIMIT: Duration = Duration::from_secs(120);

/// Collects the failed sub-checks of one criterion.
struct Verdict {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Verdict {
    fn new() -> Self {
        Verdict { failures: Vec::new(), notes: Vec::new() }
    }

    fn require(&mut self, what: &str, ok: bool) {
        if !ok {
            self.failures.push(what.to_string());
        }
    }

    fn at_most(&mut self, what: &str, value: f64, limit: f64) {
        self.note(what, value);
        self.require(&format!("{what} = {value:.3e} exceeds {limit:.3e}"), value <= limit);
    }

    fn at_least(&mut self, what: &str, value: f64, limit: f64) {
        self.note(what, value);
        self.require(&format!("{what} = {value:.3e} below {limit:.3e}"), value >= limit);
    }

    fn note(&mut self, what: &str, value: f64) {
        self.notes.push(format!("{what}={value:.3e}"));
    }

    fn timed(&mut self, elapsed: Duration, limit: Duration) {
        self.notes.push(format!("{:.1}s", elapsed.as_secs_f64()));
        self.require(&format!("took {:.1}s, limit {}s", elapsed.as_secs_f64(), limit.as_secs()), elapsed <= limit);
    }

    fn manifest(&mut self, outcome: &Outcome) {
        for c in outcome.manifest.checks.iter().filter(|c| !c.passed) {
            self.failures.push(format!("run check {} failed ({})", c.name, c.requirement));
        }
        if outcome.manifest.status != Status::Pass {
            self.failures.push(format!("run status {:?}: {:?}", outcome.manifest.status, outcome.manifest.failure));
        }
    }
}

struct Harness {
    out: tempfile::TempDir,
    configs: PathBuf,
}

impl Harness {
    fn run(&self, command: Command, config: &str, v: &mut Verdict) -> Option<(Outcome, Duration)> {
        let start = Instant::now();
        match run_config_file(command, &self.configs.join(config), self.out.path(), SEED) {
            Ok(o) => {
                let elapsed = start.elapsed();
                v.manifest(&o);
                Some((o, elapsed))
            }
            Err(e) => {
                v.require(&format!("{command} rejected {config}: {e}"), false);
                None
            }
        }
    }
}

fn json(dir: &Path, name: &str) -> Value {
    let text = fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("reading {name}: {e}"));
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("parsing {name}: {e}"))
}

/// Columns of a CSV file by header name; empty cells become NaN.
fn columns(dir: &Path, name: &str) -> Vec<(String, Vec<String>)> {
    let mut reader = csv::Reader::from_path(dir.join(name)).unwrap_or_else(|e| panic!("reading {name}: {e}"));
    let headers: Vec<String> = reader.headers().expect("header row").iter().map(String::from).collect();
    let mut cols: Vec<(String, Vec<String>)> = headers.into_iter().map(|h| (h, Vec::new())).collect();
    for record in reader.records() {
        let record = record.expect("csv record");
        for (col, cell) in cols.iter_mut().zip(record.iter()) {
            col.1.push(cell.to_string());
        }
    }
    cols
}

fn text_col<'a>(cols: &'a [(String, Vec<String>)], name: &str) -> &'a [String] {
    &cols.iter().find(|c| c.0 == name).unwrap_or_else(|| panic!("missing column {name}")).1
}

fn float_col(cols: &[(String, Vec<String>)], name: &str) -> Vec<f64> {
    text_col(cols, name).iter().map(|s| if s.is_empty() { f64::NAN } else { s.parse().expect("float cell") }).collect()
}

fn num(v: &Value, path: &str) -> f64 {
    v.pointer(path).and_then(Value::as_f64).unwrap_or_else(|| panic!("missing number at {path}"))
}

fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn entropy_inequalities(h: &Harness, v: &mut Verdict) {
    let Some((o, t)) = h.run(Command::EntropySuite, "entropy_suite.json", v) else { return };
    v.timed(t, ENTROPY_LIMIT);
    let summary = json(&o.dir, "summary.json");
    let checks = summary["checks"].as_array().expect("checks array");
    let bounds = [
        ("klein", KLEIN_FLOOR, false),
        ("relative_entropy", RELATIVE_FLOOR, false),
        ("strong_subadditivity", SSA_FLOOR, false),
        ("monotonicity", MONOTONE_FLOOR, false),
        ("joint_convexity", CONVEXITY_CEILING, true),
    ];
    for (name, bound, upper) in bounds {
        let Some(c) = checks.iter().find(|c| c["name"] == name) else {
            v.require(&format!("{name} missing from summary"), false);
            continue;
        };
        // Skipped instances have infinite relative entropy, which satisfies
        // the lower bound trivially.
        let total = c["evaluated"].as_u64().unwrap_or(0) + c["skipped"].as_u64().unwrap_or(0);
        v.require(&format!("{name} covered {total} instances"), total as usize == ENTROPY_INSTANCES);
        let worst = num(c, "/worst");
        if upper {
            v.at_most(name, worst, bound);
        } else {
            v.at_least(name, worst, bound);
        }
    }
    let ssa = &o.manifest.config["ssa_dims"];
    v.require("SSA dims include (2,2,2) and (2,3,2)", ssa.to_string().contains("[2,2,2]") && ssa.to_string().contains("[2,3,2]"));
}

fn contact_betas(config: &Value) -> (f64, f64) {
    (num(config, "/model/beta1"), num(config, "/model/beta2"))
}

/// Runs model A once for criteria 2 and 3.
fn contact_run(h: &Harness) -> (Verdict, Option<(Outcome, Duration)>) {
    let mut v = Verdict::new();
    let run = h.run(Command::ThermoEvolve, "thermo_contact_a.json", &mut v);
    (v, run)
}

fn entropy_balance(v: &mut Verdict, run: &Option<(Outcome, Duration)>) {
    let Some((o, t)) = run else { return };
    v.timed(*t, EVOLVE_LIMIT);
    let (b1, b2) = contact_betas(&o.manifest.config);
    let dims = o.manifest.config["model"]["dims"].to_string();
    v.require("model A has dims (8,2,8)", dims == "[8,2,8]");
    let cols = columns(&o.dir, "trajectory.csv");
    let (t, s) = (float_col(&cols, "t"), float_col(&cols, "s_rel"));
    let (p1, p2) = (float_col(&cols, "p1"), float_col(&cols, "p2"));
    let predicted: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| b1 * a + b2 * b).collect();
    let scale = predicted.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    // Central differences of the written entropy curve at interior points,
    // relative to the largest production rate along the run.
    let worst = (1..t.len() - 1)
        .map(|i| ((s[i + 1] - s[i - 1]) / (t[i + 1] - t[i - 1]) - predicted[i]).abs())
        .fold(0.0f64, f64::max);
    v.at_most("balance_residual", worst / scale, BALANCE_TOLERANCE);
    v.at_least("min_s_rel", s.iter().copied().fold(f64::INFINITY, f64::min), REL_ENTROPY_FLOOR);
}

fn clausius(v: &mut Verdict, run: &Option<(Outcome, Duration)>) {
    let Some((o, _)) = run else { return };
    let (b1, b2) = contact_betas(&o.manifest.config);
    let k_b = o.manifest.config["model"]["k_b"].as_f64().unwrap_or(1.0);
    v.require("T1 = 2", (1.0 / (k_b * b1) - HOT_TEMPERATURE).abs() < 1e-12);
    v.require("T2 = 1", (1.0 / (k_b * b2) - COLD_TEMPERATURE).abs() < 1e-12);
    let window = o.manifest.config["clausius_window"].as_array().expect("window set");
    let (ta, tb) = (window[0].as_f64().unwrap(), window[1].as_f64().unwrap());
    v.require("window starts after t = 0", ta > 0.0);
    let cols = columns(&o.dir, "trajectory.csv");
    let t = float_col(&cols, "t");
    let mean = |name: &str| {
        let x = float_col(&cols, name);
        let inside: Vec<f64> = t.iter().zip(&x).filter(|(t, _)| **t >= ta && **t <= tb).map(|(_, x)| *x).collect();
        inside.iter().sum::<f64>() / inside.len() as f64
    };
    let (p1, p2) = (mean("p1"), mean("p2"));
    v.note("p1_bar", p1);
    v.note("p2_bar", p2);
    v.require("P1_bar < 0", p1 < 0.0);
    v.require("P2_bar > 0", p2 > 0.0);
}

fn carnot(h: &Harness, v: &mut Verdict) {
    let Some((o, t)) = h.run(Command::ThermoCarnot, "thermo_engine_b.json", v) else { return };
    v.timed(t, CARNOT_LIMIT);
    let (b1, b2) = contact_betas(&o.manifest.config);
    v.require("T1 = 2, T2 = 1", (b1 - 1.0 / HOT_TEMPERATURE).abs() < 1e-12 && (b2 - 1.0 / COLD_TEMPERATURE).abs() < 1e-12);
    let cycles = json(&o.dir, "cycles.json");
    let work_out = -num(&cycles, "/dw");
    let heat_in = num(&cycles, "/dq1_out");
    v.require("engine delivers work from the hot side", work_out > 0.0 && heat_in > 0.0);
    let eta = work_out / heat_in;
    let carnot = 1.0 - COLD_TEMPERATURE / HOT_TEMPERATURE;
    v.at_most("eta", eta, carnot + CARNOT_SLACK);
    v.at_least("cycle_entropy_min", num(&cycles, "/ds_cycle_min"), CYCLE_ENTROPY_FLOOR);
}

fn quasi_static(h: &Harness, v: &mut Verdict) {
    let Some((o, t)) = h.run(Command::ThermoSweep, "thermo_sweep_c.json", v) else { return };
    v.timed(t, SWEEP_LIMIT);
    let base_tau = num(&o.manifest.config, "/model/tau");
    let cols = columns(&o.dir, "sweep.csv");
    let (taus, work, df) = (float_col(&cols, "tau"), float_col(&cols, "work"), float_col(&cols, "free_energy_change"));
    let gap_at = |tau: f64| taus.iter().position(|x| (x - tau).abs() < 1e-9 * tau).map(|i| (work[i] - df[i]).abs());
    match (gap_at(base_tau), gap_at(SLOW_FACTOR * base_tau)) {
        (Some(fast), Some(slow)) => {
            v.note("gap_tau", fast);
            v.note("gap_10tau", slow);
            v.require("gap at 10 tau strictly smaller", slow < fast);
        }
        _ => v.require("sweep covers tau and 10 tau", false),
    }
}

fn qbm_diffusion(h: &Harness, v: &mut Verdict) {
    let Some((o, t)) = h.run(Command::QbmRun, "qbm_k.json", v) else { return };
    v.timed(t, QBM_LIMIT);
    let cfg = &o.manifest.config;
    v.require("at least 1e4 paths", cfg["n_paths"].as_u64().unwrap_or(0) as usize >= MIN_PATHS);
    let s = json(&o.dir, "summary.json");
    for key in ["base", "scaled"] {
        let tau_c = num(&s, &format!("/{key}/mean_waiting_time"));
        let (a, b) = (num(&s, &format!("/{key}/fit/window/0")), num(&s, &format!("/{key}/fit/window/1")));
        v.require(
            &format!("{key} fit window is [10, 100] tau_c"),
            (a - WINDOW_TAU.0 * tau_c).abs() <= 1e-9 * a && (b - WINDOW_TAU.1 * tau_c).abs() <= 1e-9 * b,
        );
        v.at_least(&format!("{key}_r2"), num(&s, &format!("/{key}/fit/r2")), MSD_R2_MIN);
    }
    let (d_hat, d_gk) = (num(&s, "/base/fit/d_hat"), num(&s, "/base/d_gk"));
    v.at_most("gk_relative_error", (d_hat - d_gk).abs() / d_gk, GK_TOLERANCE);
    v.require("coupling doubled", (num(&s, "/coupling_factor") - 2.0).abs() < 1e-12);
    let ratio = num(&s, "/scaled/fit/d_hat") / d_hat;
    v.note("ratio", ratio);
    v.require(&format!("ratio {ratio:.3} outside {RATIO_RANGE:?}"), ratio >= RATIO_RANGE.0 && ratio <= RATIO_RANGE.1);
}

fn friction_model(o: &Outcome) -> FrictionModel {
    serde_json::from_value(o.manifest.config["model"].clone()).expect("model echoed in manifest")
}

fn force_at(model: &FrictionModel, speed: f64, method: friction::ForceMethod) -> f64 {
    let mut v = vec![0.0; model.d];
    v[0] = speed;
    let f = friction::friction_force(&v, model, method).expect("force evaluates");
    -f[0]
}

fn friction_statics(h: &Harness, v: &mut Verdict) {
    let Some((o, t)) = h.run(Command::FrictionCurve, "friction_curve_g.json", v) else { return };
    v.timed(t, STATICS_LIMIT);
    let cols = columns(&o.dir, "curve.csv");
    let (speeds, force) = (float_col(&cols, "v"), float_col(&cols, "force"));
    // Drag opposes motion: the force on the particle is −force·v̂.
    let power = speeds.iter().zip(&force).map(|(s, f)| -f * s).fold(f64::NEG_INFINITY, f64::max);
    v.at_most("max_f_dot_v", power, 0.0);
    let peaks: Vec<usize> = (1..force.len() - 1).filter(|&i| force[i] > force[i - 1] && force[i] >= force[i + 1]).collect();
    v.require("exactly one interior maximum", peaks.len() == 1);
    let f_max = force.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let s = json(&o.dir, "summary.json");
    v.require("curve maximum matches reported F_max", num(&s, "/f_max") >= f_max);
    v.at_most("rest_deviation/bound", num(&s, "/rest_deviation") / num(&s, "/rest_bound"), 1.0);

    let model = friction_model(&o);
    let method: friction::ForceMethod =
        serde_json::from_value(o.manifest.config["curve"]["method"].clone()).expect("method echoed");
    let f_max = num(&s, "/f_max");
    let b = columns(&o.dir, "branches.csv");
    let (frac, kind) = (float_col(&b, "fraction"), text_col(&b, "kind"));
    let (vm, vp) = (float_col(&b, "v_minus"), float_col(&b, "v_plus"));
    let row = |f: f64| frac.iter().position(|x| (x - f).abs() < 1e-12);
    match row(BRANCH_FRACTION) {
        Some(i) if kind[i] == "stationary" => {
            v.require("v_minus < v_plus", vm[i] < vp[i]);
            let target = BRANCH_FRACTION * f_max;
            for (name, speed) in [("v_minus", vm[i]), ("v_plus", vp[i])] {
                let err = (force_at(&model, speed, method) - target).abs();
                v.at_most(&format!("{name}_force_error/F_max"), err / f_max, BRANCH_FORCE_TOLERANCE);
            }
        }
        _ => v.require("two branches at 0.5 F_max", false),
    }
    match row(NO_SOLUTION_FRACTION) {
        Some(i) => v.require("no stationary solution at 1.2 F_max", kind[i] == "no_stationary_solution"),
        None => v.require("branch table has 1.2 F_max", false),
    }
}

fn friction_dynamics(h: &Harness, v: &mut Verdict) {
    let Some((o, t)) = h.run(Command::FrictionEvolve, "friction_evolve_3d.json", v) else { return };
    v.timed(t, DYNAMICS_LIMIT);
    let cfg = &o.manifest.config;
    v.require("3d grid with N = 48", cfg["model"]["d"] == 3 && cfg["model"]["N"] == 48);
    v.require("no external force", cfg["model"]["F"].as_array().is_none_or(|f| f.iter().all(|x| x.as_f64() == Some(0.0))));

    let env = columns(&o.dir, "envelope.csv");
    let (te, pe) = (float_col(&env, "t"), float_col(&env, "momentum"));
    let lx: Vec<f64> = te.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = pe.iter().map(|p| p.ln()).collect();
    let alpha = least_squares_slope(&lx, &ly);
    v.note("decay_exponent", alpha);
    v.require(&format!("decay exponent {alpha:.3} outside {DECAY_RANGE:?}"), alpha >= DECAY_RANGE.0 && alpha <= DECAY_RANGE.1);

    let coupled = columns(&o.dir, "momentum.csv");
    let (tc, pc, res) = (float_col(&coupled, "t"), float_col(&coupled, "momentum"), float_col(&coupled, "residual"));
    let (late_t, late_r): (Vec<f64>, Vec<f64>) =
        tc.iter().zip(&res).filter(|(t, r)| **t >= TRANSIENT_END && r.is_finite()).map(|(t, r)| (*t, *r)).unzip();
    let slope = least_squares_slope(&late_t, &late_r);
    v.note("residual_slope", slope);
    v.require("field residual decreasing after transient", slope < 0.0 && late_r.last() < late_r.first());

    let memory = columns(&o.dir, "memory.csv");
    let (tm, pm) = (float_col(&memory, "t"), float_col(&memory, "momentum"));
    let scale = pc.iter().copied().fold(0.0f64, f64::max);
    let mut worst = 0.0f64;
    let mut matched = 0;
    for (t, p) in tc.iter().zip(&pc) {
        if let Some(j) = tm.iter().position(|x| (x - t).abs() < 1e-9) {
            worst = worst.max((pm[j] - p).abs() / scale);
            matched += 1;
        }
    }
    v.require("memory and coupled runs share sample times", matched * 2 >= tc.len());
    v.at_most("memory_deviation", worst, MEMORY_AGREEMENT);
}

fn subsonic(h: &Harness, v: &mut Verdict) {
    let Some((o, t)) = h.run(Command::FrictionCurve, "friction_curve_bogoliubov.json", v) else { return };
    v.timed(t, SUBSONIC_LIMIT);
    let model = friction_model(&o);
    v.require("vstar > 0", model.vstar > 0.0);
    let f_max = num(&json(&o.dir, "summary.json"), "/f_max");
    let noise = NOISE_FRACTION * f_max;
    let cols = columns(&o.dir, "subsonic.csv");
    let (speeds, force) = (float_col(&cols, "v"), float_col(&cols, "force"));
    let slow: Vec<f64> = speeds.iter().zip(&force).filter(|(s, _)| **s <= SUBSONIC_FRACTION * model.vstar + 1e-12).map(|(_, f)| f.abs()).collect();
    let fast: Vec<f64> = speeds.iter().zip(&force).filter(|(s, _)| **s >= SUPERSONIC_FRACTION * model.vstar - 1e-12).map(|(_, f)| f.abs()).collect();
    v.require("probes on both sides", !slow.is_empty() && !fast.is_empty());
    v.require("slow probe reaches 0.8 vstar", speeds.iter().any(|s| (s - SUBSONIC_FRACTION * model.vstar).abs() < 1e-12));
    v.require("fast probe starts at 1.5 vstar", speeds.iter().any(|s| (s - SUPERSONIC_FRACTION * model.vstar).abs() < 1e-12));
    v.at_most("subsonic_max/noise", slow.iter().copied().fold(0.0, f64::max) / noise, 1.0);
    v.at_least("supersonic_min/noise", fast.iter().copied().fold(f64::INFINITY, f64::min) / noise, SIGNAL_FACTOR);
}

fn payload(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .expect("run dir")
        .map(|e| e.expect("dir entry").path())
        .filter(|p| p.file_name().is_some_and(|n| n != "manifest.json"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).expect("payload file")))
        .collect();
    files.sort();
    files
}

fn eth_collapse(h: &Harness, v: &mut Verdict) {
    let Some((o, t)) = h.run(Command::EthRun, "eth_bundled.json", v) else { return };
    v.timed(t, ETH_LIMIT);
    let s = json(&o.dir, "summary.json");
    let models = s.as_array().expect("one summary per model");
    v.require("all four bundled models ran", models.len() == 4);
    for m in models {
        let name = m["name"].as_str().unwrap_or("?");
        v.require(&format!("{name}: no failed histories"), m["failures"].as_u64() == Some(0));
        v.require(&format!("{name}: >= 1e4 histories"), m["histories"].as_u64().unwrap_or(0) >= MIN_HISTORIES);
        v.require(&format!("{name}: replay identical"), m["replay_identical"] == true);
        v.at_most(&format!("{name}_partition_error"), num(m, "/worst_partition_error"), PARTITION_TOLERANCE);
    }

    let steps = columns(&o.dir, "steps.csv");
    let (model, dim) = (text_col(&steps, "model"), float_col(&steps, "tail_dim"));
    for i in 1..model.len() {
        if model[i] == model[i - 1] {
            v.require(&format!("{}: tail dimension shrinks at step {i}", model[i]), dim[i] < dim[i - 1]);
        }
    }
    v.at_most("steps_partition_error", float_col(&steps, "worst_partition_error").into_iter().fold(0.0, f64::max), PARTITION_TOLERANCE);

    let freq = columns(&o.dir, "frequencies.csv");
    let (fm, fs) = (text_col(&freq, "model"), text_col(&freq, "event_step"));
    let (weight, count) = (float_col(&freq, "born_weight"), float_col(&freq, "count"));
    let mut worst_z = 0.0f64;
    for i in 0..fm.len() {
        let n: f64 = (0..fm.len()).filter(|&j| fm[j] == fm[i] && fs[j] == fs[i]).map(|j| count[j]).sum();
        let w = weight[i];
        if w > 0.0 && w < 1.0 {
            worst_z = worst_z.max((count[i] / n - w).abs() / (w * (1.0 - w) / n).sqrt());
        }
    }
    v.at_most("born_z", worst_z, BORN_Z_MAX);

    // Same seed, fresh directory: the payload must match byte for byte.
    if let Some((again, _)) = h.run(Command::EthRun, "eth_bundled.json", v) {
        v.require("rerun lands in a new directory", again.dir != o.dir);
        v.require("rerun payload identical", payload(&again.dir) == payload(&o.dir));
    }
}

fn verdict(h: &Harness, f: fn(&Harness, &mut Verdict)) -> Verdict {
    let mut v = Verdict::new();
    f(h, &mut v);
    v
}

fn main() -> ExitCode {
    let h = Harness {
        out: tempfile::tempdir().expect("temp dir"),
        configs: Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs"),
    };
    let (mut balance, contact) = contact_run(&h);
    let mut heat_flow = Verdict::new();
    heat_flow.require("model A run did not complete", contact.is_some());
    clausius(&mut heat_flow, &contact);
    entropy_balance(&mut balance, &contact);

    let verdicts = [
        (1, "entropy inequalities", verdict(&h, entropy_inequalities)),
        (2, "entropy production identity", balance),
        (3, "heat flows hot to cold", heat_flow),
        (4, "Carnot bound", verdict(&h, carnot)),
        (5, "quasi-static work", verdict(&h, quasi_static)),
        (6, "kinetic diffusion", verdict(&h, qbm_diffusion)),
        (7, "friction statics", verdict(&h, friction_statics)),
        (8, "friction dynamics", verdict(&h, friction_dynamics)),
        (9, "subsonic Bogoliubov", verdict(&h, subsonic)),
        (10, "collapse histories", verdict(&h, eth_collapse)),
    ];

    let mut all = true;
    for (n, title, v) in &verdicts {
        let ok = v.failures.is_empty();
        all &= ok;
        println!("criterion {n:>2} {}: {title}  [{}]", if ok { "PASS" } else { "FAIL" }, v.notes.join(", "));
        for f in &v.failures {
            println!("    - {f}");
        }
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion.
//!
//! The long simulations and trainings are cached under
//! `target/acceptance-cache`; an entry is rebuilt when its settings change.
//! A cold run takes a few hours on one core.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use dnnmg::cli::{simulate_dnnmg, simulate_level, RunOutput, Snapshots};
use dnnmg::divfree::{curl_perp_basis, stream_to_velocity, EtaTable, StreamCoeffs};
use dnnmg::dnnmg::{generate_training_data, train, DataConfig, DnnMg, Scenario, TrainConfig, TrainingRun, Variant};
use dnnmg::error::{Error, Result};
use dnnmg::fem::{BoundaryConditions, FeProblem, FlowParams, State};
use dnnmg::mesh::{build_channel_mesh, transfer, MeshHierarchy, MeshLevel};
use dnnmg::metrics::{divergence_norm, drag_lift, ForceMethod, FunctionalSeries, RunStats};
use dnnmg::neural::{checkpoint, unit_loss, LossKind, NetConfig, Network, OutputMode, PatchGeometry};
use dnnmg::solver::{flow_multigrid, gmres, GmresConfig, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DATA_TOTAL_STEPS: usize = 1000;
const DATA_RECORD_STEPS: usize = 200;
const REFERENCE_STEPS: usize = 1500;
const EVAL_STEPS: usize = 1000;
const EPOCHS: usize = 50;
const GAMMA: f64 = 1e-3;
const START_TIME: f64 = 5.0;
const PHYSICS_WINDOW: (f64, f64) = (8.0, 15.005);
const EVAL_WINDOW: (f64, f64) = (8.0, 10.005);
const RAMP: f64 = 1.0;

const DRAG_REF: f64 = 0.3301;
const FREQ_REF: f64 = 3.81;

type Outcome = Result<(bool, String)>;

struct Report {
    results: Vec<(String, bool)>,
}

impl Report {
    fn check(&mut self, id: &str, title: &str, f: impl FnOnce() -> Outcome) {
        let clock = Instant::now();
        let (ok, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        let tag = if ok { "PASS" } else { "FAIL" };
        println!("[{tag}] {id} {title}: {detail} ({:.1} s)", clock.elapsed().as_secs_f64());
        self.results.push((id.to_string(), ok));
    }
}

// ---------------------------------------------------------------- cache

fn cache_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../target/acceptance-cache")
}

struct Artifact {
    dir: PathBuf,
}

impl Artifact {
    fn open(name: &str, key: &str) -> Result<Self> {
        let dir = cache_root().join(name);
        let key_path = dir.join("key.txt");
        let stale = fs::read_to_string(&key_path).map(|k| k != key).unwrap_or(true);
        if stale {
            if dir.exists() {
                fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            }
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            fs::write(&key_path, key).map_err(|e| Error::io(&key_path, e))?;
        }
        Ok(Self { dir })
    }

    fn path(&self, f: &str) -> PathBuf {
        self.dir.join(f)
    }

    fn done(&self) -> bool {
        self.path("meta.txt").exists()
    }

    fn finish(&self, meta: &[(&str, String)]) -> Result<()> {
        let mut s = String::new();
        for (k, v) in meta {
            writeln!(s, "{k} = {v}").unwrap();
        }
        let p = self.path("meta.txt");
        fs::write(&p, s).map_err(|e| Error::io(&p, e))
    }

    fn meta(&self, key: &str) -> Result<String> {
        let p = self.path("meta.txt");
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        text.lines()
            .filter_map(|l| l.split_once(" = "))
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v.to_string())
            .ok_or_else(|| Error::Data(format!("{} lacks {key}", p.display())))
    }

    fn meta_f64(&self, key: &str) -> Result<f64> {
        self.meta(key)?.parse().map_err(|_| Error::Data(format!("{key} is not a number")))
    }

    /// Failure recorded while building the entry, if any.
    fn failure(&self) -> Option<String> {
        self.meta("error").ok()
    }
}

fn progress(msg: &str) {
    eprintln!("  ... {msg}");
}

fn scenario_key(s: &Scenario) -> String {
    format!("{s:?}")
}

fn solver() -> SolverConfig {
    SolverConfig::default()
}

fn run_meta(out: &RunOutput) -> Vec<(&'static str, String)> {
    vec![
        ("seconds", out.seconds.to_string()),
        ("steps", out.series.len().to_string()),
        ("max_newton_after_ramp", out.max_newton_after(RAMP).to_string()),
        ("mean_correction_norm", out.mean_correction_norm().to_string()),
    ]
}

fn save_run(a: &Artifact, out: &RunOutput) -> Result<()> {
    out.series.write_csv(&a.path("series.csv"))?;
    if let Some(c) = &out.coarse_series {
        c.write_csv(&a.path("coarse_series.csv"))?;
    }
    a.finish(&run_meta(out))
}

/// Fine reference run on the test channel.
fn fine_reference() -> Result<Artifact> {
    let sc = Scenario::test();
    let a = Artifact::open("fine-test", &format!("{} {REFERENCE_STEPS} {:?}", scenario_key(&sc), solver()))?;
    if !a.done() {
        progress("fine reference run on the test channel");
        let pb = sc.build()?;
        let out = simulate_level(&pb, sc.fine_level(), solver(), REFERENCE_STEPS, &Snapshots::default(), |n, x, _| {
            if n % 100 == 0 {
                progress(&format!("fine t = {:.2}", x.t));
            }
        })?;
        save_run(&a, &out)?;
    }
    Ok(a)
}

/// Coarse run on the test channel.
fn coarse_run() -> Result<Artifact> {
    let sc = Scenario::test();
    let a = Artifact::open("off-test", &format!("{} {REFERENCE_STEPS} {:?}", scenario_key(&sc), solver()))?;
    if !a.done() {
        progress("coarse run on the test channel");
        let pb = sc.build()?;
        let out = simulate_dnnmg(&pb, solver(), None, START_TIME, REFERENCE_STEPS, &Snapshots::default())?;
        save_run(&a, &out)?;
    }
    Ok(a)
}

fn dataset() -> Result<Artifact> {
    let sc = Scenario::train();
    let a = Artifact::open(
        "train-data",
        &format!("{} {DATA_TOTAL_STEPS} {DATA_RECORD_STEPS} {:?}", scenario_key(&sc), solver()),
    )?;
    if !a.done() {
        progress("training data from a fine run on the training channel");
        let pb = sc.build()?;
        let cfg = DataConfig { total_steps: DATA_TOTAL_STEPS, record_steps: DATA_RECORD_STEPS, solver: solver() };
        let mut series = FunctionalSeries::default();
        let mut max_newton = 0;
        let clock = Instant::now();
        let run = generate_training_data(&pb, &sc, &cfg, |x, prev, r| {
            let (d, l) = drag_lift(&pb, x, Some(prev), ForceMethod::Residual).unwrap_or((f64::NAN, f64::NAN));
            let div = divergence_norm(pb.level(x.level), x.velocity(), true).unwrap_or(f64::NAN);
            series.push(x.t, d, l, div);
            if x.t > RAMP {
                max_newton = max_newton.max(r.iterations());
            }
            if series.len() % 100 == 0 {
                progress(&format!("fine t = {:.2}", x.t));
            }
        })?;
        run.save(&a.path("data"))?;
        series.write_csv(&a.path("series.csv"))?;
        a.finish(&[
            ("seconds", clock.elapsed().as_secs_f64().to_string()),
            ("max_newton_after_ramp", max_newton.to_string()),
        ])?;
    }
    Ok(a)
}

fn train_config(v: Variant) -> TrainConfig {
    TrainConfig { loss: v.loss(GAMMA).expect("network variant"), epochs: EPOCHS, seed: 1, ..TrainConfig::default() }
}

fn network(v: Variant, data: &Artifact, loaded: &mut Option<TrainingRun>) -> Result<Artifact> {
    let cfg = train_config(v);
    let a = Artifact::open(&format!("net-{}", v.name()), &format!("{cfg:?} {}", data.meta("seconds")?))?;
    if !a.done() {
        progress(&format!("training the {} network", v.name()));
        if loaded.is_none() {
            *loaded = Some(TrainingRun::load(&data.path("data"))?);
        }
        let sc = Scenario::train();
        let pb = sc.build()?;
        let (net, report) = train(&pb, loaded.as_ref().expect("loaded above"), &cfg, |e| {
            progress(&format!("{} epoch {} loss {:.4e} {:.1} s", v.name(), e.epoch, e.loss, e.seconds))
        })?;
        checkpoint::save(&net, &a.path("net.bin"), &[("variant", v.name().to_string())])?;
        let mut csv = String::from("epoch,loss,seconds\n");
        for e in &report.epochs {
            writeln!(csv, "{},{},{}", e.epoch, e.loss, e.seconds).unwrap();
        }
        fs::write(a.path("epochs.csv"), csv).map_err(|e| Error::io(a.path("epochs.csv"), e))?;
        a.finish(&[
            ("mean_epoch_seconds", report.mean_epoch_seconds().to_string()),
            ("final_loss", report.epochs.last().map_or(f64::NAN, |e| e.loss).to_string()),
        ])?;
    }
    Ok(a)
}

fn evaluation(v: Variant, net: &Artifact) -> Result<Artifact> {
    let sc = Scenario::test();
    let a = Artifact::open(
        &format!("eval-{}", v.name()),
        &format!("{} {EVAL_STEPS} {START_TIME} {:?} {}", scenario_key(&sc), solver(), net.meta("final_loss")?),
    )?;
    if !a.done() {
        progress(&format!("DNN-MG run with the {} network", v.name()));
        let pb = sc.build()?;
        let model = checkpoint::load(&net.path("net.bin"))?;
        match simulate_dnnmg(&pb, solver(), Some(model), START_TIME, EVAL_STEPS, &Snapshots::default()) {
            Ok(out) => {
                let mut csv = String::from("time,correction_norm\n");
                for (t, d) in out.series.times.iter().zip(&out.correction_norms) {
                    writeln!(csv, "{t},{d}").unwrap();
                }
                fs::write(a.path("corrections.csv"), csv).map_err(|e| Error::io(a.path("corrections.csv"), e))?;
                save_run(&a, &out)?;
            }
            Err(e) => a.finish(&[("error", e.to_string())])?,
        }
    }
    Ok(a)
}

// ---------------------------------------------------------------- criteria

fn divergence_free_construction() -> Outcome {
    let clock = Instant::now();
    let m = build_channel_mesh(2.25, 0.4, Scenario::TEST_CENTER, 0.1, 0.05)?;
    let fine = MeshHierarchy::new(m, 3)?;
    let fine = fine.finest();
    let interior: Vec<usize> =
        (0..fine.num_elements()).filter(|&e| fine.elem_nodes[e].iter().all(|&n| !fine.is_dirichlet_node(n))).collect();
    let table = EtaTable::get();
    let g = dnnmg::basis::gauss_1d(3);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    // |div| relative to the summed magnitude of its two terms, i.e. to round-off
    let mut worst_rel: f64 = 0.0;
    for _ in 0..1000 {
        let e = interior[rng.gen_range(0..interior.len())];
        let s: StreamCoeffs = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        // elements of a level are congruent squares; the origin only locates `e`
        debug_assert!(fine.element_origin(e)[0] >= 0.0);
        let h = [fine.h, fine.h];
        let d = stream_to_velocity(&s, h, &[false; 9], table);
        for &(x, _) in &g {
            for &(y, _) in &g {
                let grads = dnnmg::basis::q2_gradients(x, y);
                let div: f64 = (0..9).map(|a| d[a] * grads[a][0] / h[0] + d[9 + a] * grads[a][1] / h[1]).sum();
                let scale: f64 =
                    (0..9).map(|a| (d[a] * grads[a][0] / h[0]).abs() + (d[9 + a] * grads[a][1] / h[1]).abs()).sum();
                worst = worst.max(div.abs());
                worst_rel = worst_rel.max(div.abs() / scale.max(f64::MIN_POSITIVE));
            }
        }
    }
    let secs = clock.elapsed().as_secs_f64();
    Ok((
        worst <= 1e-13 && secs < 1.0,
        format!(
            "max |div| {worst:.2e} (relative to term magnitudes {worst_rel:.1e}) on {} interior elements, {secs:.3} s",
            interior.len()
        ),
    ))
}

fn curl_perp_oracle() -> Outcome {
    // ∇⊥ψ = (−∂ψ/∂y, ∂ψ/∂x) of x, x², y, xy, x²y, y², xy², x²y²
    let fields: [fn(f64, f64) -> [f64; 2]; 8] = [
        |_, _| [0.0, 1.0],
        |x, _| [0.0, 2.0 * x],
        |_, _| [-1.0, 0.0],
        |x, y| [-x, y],
        |x, y| [-x * x, 2.0 * x * y],
        |_, y| [-2.0 * y, 0.0],
        |x, y| [-2.0 * x * y, y * y],
        |x, y| [-2.0 * x * x * y, 2.0 * x * y * y],
    ];
    let mut mismatches = 0;
    for (k, f) in fields.iter().enumerate() {
        for i in 0..5 {
            for j in 0..5 {
                let (x, y) = (i as f64 / 4.0, j as f64 / 4.0);
                if curl_perp_basis(k + 2, x, y)? != f(x, y) {
                    mismatches += 1;
                }
            }
        }
    }
    Ok((mismatches == 0, format!("{mismatches} mismatches in 8 fields × 25 points")))
}

fn transfer_identity() -> Outcome {
    let m = build_channel_mesh(2.25, 0.4, Scenario::TEST_CENTER, 0.1, 0.05)?;
    let h = MeshHierarchy::new(m, 3)?;
    let l = 1;
    let (nc, nf) = (h.level(l).num_nodes(), h.level(l + 1).num_nodes());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut id_err, mut adj_err): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let v: Vec<f64> = (0..nc).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let pv = transfer::prolongate(&h, l, &v, 1)?;
        let back = transfer::restrict_function(&h, l, &pv, 1)?;
        let num = back.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let den = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        id_err = id_err.max(num / den);

        let b: Vec<f64> = (0..nf).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let rb = transfer::restrict_functional(&h, l, &b, 1)?;
        let lhs: f64 = rb.iter().zip(&v).map(|(a, c)| a * c).sum();
        let rhs: f64 = b.iter().zip(&pv).map(|(a, c)| a * c).sum();
        let scale = rb.iter().zip(&v).map(|(a, c)| (a * c).abs()).sum::<f64>();
        adj_err = adj_err.max((lhs - rhs).abs() / scale);
    }
    Ok((id_err <= 1e-12 && adj_err <= 1e-12, format!("‖RPv − v‖/‖v‖ ≤ {id_err:.1e}, adjointness {adj_err:.1e}")))
}

fn gradients() -> Outcome {
    let clock = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    // FEM Jacobian on a small channel
    let m = MeshLevel::rectangle(1.0, 0.5, 0.125)?;
    let params = FlowParams { reynolds: 80.0, viscosity: 0.0125, timestep: 0.02, lps_alpha0: 0.05, convection: true };
    let pb = FeProblem::new(MeshHierarchy::new(m, 1)?, params, BoundaryConditions::channel(1.5, 0.5, 0.0))?;
    let mut x = State::zeros(&pb, 0, 0.3);
    for v in &mut x.x {
        *v = rng.gen_range(-1.0..1.0);
    }
    pb.apply_dirichlet(&mut x, 0.3);
    let rhs: Vec<f64> = (0..x.x.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let jac = pb.assemble_jacobian(&x)?;
    let mut jac_worst: f64 = 0.0;
    for _ in 0..3 {
        let w: Vec<f64> = (0..x.x.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let eps = 1e-6;
        let shifted = |s: f64| -> Result<Vec<f64>> {
            let mut y = x.clone();
            y.x.iter_mut().zip(&w).for_each(|(a, b)| *a += s * b);
            pb.assemble_residual(&y, &rhs)
        };
        let (rp, rm) = (shifted(eps)?, shifted(-eps)?);
        let jw = jac.mul(&w);
        let num =
            rp.iter().zip(&rm).zip(&jw).map(|((a, b), c)| ((a - b) / (2.0 * eps) - c).powi(2)).sum::<f64>().sqrt();
        let den = jw.iter().map(|a| a * a).sum::<f64>().sqrt();
        jac_worst = jac_worst.max(num / den);
    }
    // losses with respect to the network outputs
    let mut loss_worst: f64 = 0.0;
    let mut geom = PatchGeometry::interior([0.0125, 0.0125]);
    geom.dirichlet[3] = true;
    let kinds = [LossKind::Base, LossKind::P1 { gamma: 0.1 }, LossKind::P2 { gamma: 0.1 }, LossKind::Psi];
    for kind in kinds {
        let n_out = if kind == LossKind::Psi { 32 } else { 50 };
        let scale = if kind == LossKind::Psi { 0.01 } else { 1.0 };
        let target: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let coarse: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let out: Vec<f64> = (0..n_out).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
        let mut g = vec![0.0; n_out];
        unit_loss(kind, &target, &coarse, &out, &geom, Some(&mut g));
        let gmax = g.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        for i in 0..n_out {
            let eps = 1e-6 * scale;
            let mut a = out.clone();
            a[i] += eps;
            let mut b = out.clone();
            b[i] -= eps;
            let fd = (unit_loss(kind, &target, &coarse, &a, &geom, None)
                - unit_loss(kind, &target, &coarse, &b, &geom, None))
                / (2.0 * eps);
            loss_worst = loss_worst.max((fd - g[i]).abs() / fd.abs().max(1e-4 * gmax));
        }
    }
    let secs = clock.elapsed().as_secs_f64();
    Ok((
        jac_worst < 1e-5 && loss_worst < 1e-5 && secs < 60.0,
        format!("Jacobian {jac_worst:.1e}, losses {loss_worst:.1e} (relative), {secs:.1} s"),
    ))
}

fn linear_iterations(pb: &FeProblem, level: usize) -> Result<usize> {
    let t = 1.0;
    let mut x = State::zeros(pb, level, t);
    pb.apply_dirichlet(&mut x, t);
    let rhs = pb.assemble_rhs(&x, t)?;
    let cfg = solver();
    let mg = flow_multigrid(pb, &x, &cfg)?;
    let jac = &mg.levels[mg.num_levels() - 1].matrix;
    let r: Vec<f64> = pb.assemble_residual(&x, &rhs)?.iter().map(|v| -v).collect();
    let g = GmresConfig { tol: 1e-8, abs_tol: 0.0, restart: 50, max_iter: 200 };
    Ok(gmres(jac, &r, |v, z| mg.apply(v, z), &g)?.iterations)
}

fn solver_quality(coarse: &Artifact, fine: &Artifact) -> Outcome {
    let pb = Scenario::test().build()?;
    let cfg = solver();
    let (il, ifine) = (linear_iterations(&pb, 1)?, linear_iterations(&pb, 2)?);
    let growth = ifine as f64 / il as f64;
    let newton_c: usize = coarse.meta("max_newton_after_ramp")?.parse().unwrap_or(usize::MAX);
    let newton_f: usize = fine.meta("max_newton_after_ramp")?.parse().unwrap_or(usize::MAX);
    let ok = il <= 30 && ifine <= 30 && growth <= 1.5 && newton_c <= 8 && newton_f <= 8 && cfg.mg_pre_smooth <= 4;
    Ok((
        ok,
        format!(
            "GMRES to 1e-8 with {}+{} smoothing: {il} iterations on L, {ifine} on L+1 (×{growth:.2}); \
             max Newton iterations after ramp {newton_c} coarse, {newton_f} fine",
            cfg.mg_pre_smooth, cfg.mg_post_smooth
        ),
    ))
}

fn mean_over(s: &FunctionalSeries, w: (f64, f64)) -> f64 {
    let v: Vec<f64> =
        s.times.iter().zip(&s.divergence).filter(|(t, _)| **t >= w.0 && **t <= w.1).map(|(_, d)| *d).collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn benchmark_physics(coarse: &Artifact, fine: &Artifact) -> Outcome {
    let cs = FunctionalSeries::read_csv(&coarse.path("coarse_series.csv"))?;
    let fs_ = FunctionalSeries::read_csv(&fine.path("series.csv"))?;
    let st = RunStats::from_series(&cs, PHYSICS_WINDOW)?;
    let drag_err = (st.drag.mean - DRAG_REF) / DRAG_REF;
    let freq_err = (st.lift.frequency - FREQ_REF) / FREQ_REF;
    let shedding = st.lift.frequency_defined && st.lift.amplitude > 0.01;
    let (div_c, div_f) = (mean_over(&cs, PHYSICS_WINDOW), mean_over(&fs_, PHYSICS_WINDOW));
    let (tc, tf) = (coarse.meta_f64("seconds")?, fine.meta_f64("seconds")?);
    let ok = shedding
        && drag_err.abs() <= 0.10
        && freq_err.abs() <= 0.15
        && div_f < div_c
        && tc <= 15.0 * 60.0
        && tf <= 2.0 * 3600.0;
    Ok((
        ok,
        format!(
            "drag mean {:.4} ({:+.1}%), frequency {:.3} ({:+.1}%), lift amplitude {:.4}; \
             mean ‖∇·v‖ fine {div_f:.3} vs coarse {div_c:.3}; runtime coarse {:.1} min, fine {:.1} min",
            st.drag.mean,
            100.0 * drag_err,
            st.lift.frequency,
            100.0 * freq_err,
            st.lift.amplitude,
            tc / 60.0,
            tf / 60.0
        ),
    ))
}

fn eval_stats(a: &Artifact) -> Result<RunStats> {
    if let Some(e) = a.failure() {
        return Err(Error::Data(format!("run failed: {e}")));
    }
    RunStats::from_series(&FunctionalSeries::read_csv(&a.path("series.csv"))?, EVAL_WINDOW)
}

fn baseline_equivalence() -> Outcome {
    let pb = Scenario::test().build()?;
    let mut off = DnnMg::new(&pb, solver(), None)?;
    let mut zero = DnnMg::new(&pb, solver(), Some(Network::zeros(OutputMode::Stream, NetConfig::STREAM)))?;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        off.step()?;
        zero.step()?;
        let d = off.state().x.iter().zip(&zero.state().x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(d);
    }
    Ok((worst <= 1e-10, format!("max nodal difference over 100 steps {worst:.1e}")))
}

fn cli(args: &[&str], dir: &Path) -> Result<()> {
    let status = Command::new(env!("CARGO_BIN_EXE_dnnmg"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .status()
        .map_err(|e| Error::io(dir, e))?;
    if status.success() {
        Ok(())
    } else {
        Err(Error::Data(format!("`dnnmg {}` exited with {status}", args.join(" "))))
    }
}

fn determinism() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| Error::io("tempdir", e))?;
    let config = "seed = 7\n[scenario]\nlevels = 2\nend_time = 0.2\n[dnnmg]\nstart_time = 0.0\n\
                  [train]\ntotal_steps = 12\nrecord_steps = 6\nepochs = 2\nwindow = 3\n[output]\nvtk_every = 0\n";
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let dir = root.path().join(run);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        fs::write(dir.join("run.toml"), config).map_err(|e| Error::io(&dir, e))?;
        cli(&["train", "--config", "run.toml", "--variant", "psi", "--out", "nets"], &dir)?;
        cli(
            &["simulate", "--config", "run.toml", "--variant", "psi", "--checkpoint", "nets/psi.bin", "--out", "sim"],
            &dir,
        )?;
        let mut contents = Vec::new();
        for f in ["nets/psi.bin", "nets/psi.loss.csv", "sim/series.csv", "sim/coarse_series.csv"] {
            let p = dir.join(f);
            contents.push(fs::read(&p).map_err(|e| Error::io(&p, e))?);
        }
        files.push(contents);
    }
    let same = files[0] == files[1];
    Ok((same, format!("checkpoint, loss curve and series of two runs {}", if same { "identical" } else { "differ" })))
}

fn get(list: &[(Variant, Result<Artifact>)], v: Variant) -> Result<&Artifact> {
    heavy(&list.iter().find(|(w, _)| *w == v).expect("variant listed").1)
}

/// A cached entry, or the reason it could not be built.
fn heavy(a: &Result<Artifact>) -> Result<&Artifact> {
    a.as_ref().map_err(|e| Error::Data(e.to_string()))
}

fn main() {
    println!("acceptance: cache at {}", cache_root().display());
    let mut r = Report { results: Vec::new() };
    r.check("1", "divergence-free construction", divergence_free_construction);
    r.check("2", "curl-perp basis oracle", curl_perp_oracle);
    r.check("3", "transfer identity and adjointness", transfer_identity);
    r.check("4", "Jacobian and loss gradients", gradients);

    let coarse = coarse_run();
    let fine = fine_reference();
    r.check("5", "solver quality", || solver_quality(heavy(&coarse)?, heavy(&fine)?));
    r.check("6", "benchmark physics", || benchmark_physics(heavy(&coarse)?, heavy(&fine)?));

    let data = dataset();
    let mut loaded = None;
    let nets: Vec<(Variant, Result<Artifact>)> = [Variant::Plain, Variant::P1, Variant::P2, Variant::Psi]
        .into_iter()
        .map(|v| (v, heavy(&data).and_then(|d| network(v, d, &mut loaded))))
        .collect();
    drop(loaded);
    let evals: Vec<(Variant, Result<Artifact>)> =
        nets.iter().map(|(v, n)| (*v, heavy(n).and_then(|n| evaluation(*v, n)))).collect();

    r.check("7a", "stream-function correction beats plain DNN-MG on drag mean", || {
        let reference =
            RunStats::from_series(&FunctionalSeries::read_csv(&heavy(&fine)?.path("series.csv"))?, EVAL_WINDOW)?;
        let err = |v| -> Result<f64> {
            let s = eval_stats(get(&evals, v)?)?;
            Ok((s.drag.mean - reference.drag.mean).abs() / reference.drag.mean.abs() * 100.0)
        };
        let (psi, plain) = (err(Variant::Psi)?, err(Variant::Plain)?);
        let coarse = {
            let cs = FunctionalSeries::read_csv(&heavy(&coarse)?.path("series.csv"))?;
            let s = RunStats::from_series(&cs, EVAL_WINDOW)?;
            (s.drag.mean - reference.drag.mean).abs() / reference.drag.mean.abs() * 100.0
        };
        Ok((psi < plain, format!("drag-mean error psi {psi:.2}%, plain {plain:.2}% (coarse {coarse:.2}%)")))
    });
    r.check("7b", "stream-function epochs are cheaper", || {
        let psi = get(&nets, Variant::Psi)?.meta_f64("mean_epoch_seconds")?;
        let plain = get(&nets, Variant::Plain)?.meta_f64("mean_epoch_seconds")?;
        Ok((psi <= 0.9 * plain, format!("mean epoch psi {psi:.1} s, plain {plain:.1} s (ratio {:.2})", psi / plain)))
    });
    r.check("7c", "penalty variants collapse the correction", || {
        let norm = |v| -> Result<f64> {
            let a = get(&evals, v)?;
            if let Some(e) = a.failure() {
                return Err(Error::Data(format!("{} run failed: {e}", v.name())));
            }
            a.meta_f64("mean_correction_norm")
        };
        let (base, p1, p2) = (norm(Variant::Plain)?, norm(Variant::P1)?, norm(Variant::P2)?);
        Ok((
            p1 < 0.1 * base && p2 < 0.1 * base,
            format!("mean ‖d‖ at γ = {GAMMA:e}: p1 {p1:.3e}, p2 {p2:.3e}, unpenalized {base:.3e}"),
        ))
    });
    r.check("8", "baseline equivalence", baseline_equivalence);
    r.check("9", "determinism", determinism);

    // oscillation statistics of every cached run, for the record
    for (v, a) in &evals {
        if let Ok(a) = a {
            match eval_stats(a) {
                Ok(s) => println!(
                    "       {}: drag mean {:.4}, lift amplitude {:.4}, frequency {:.3}",
                    v.name(),
                    s.drag.mean,
                    s.lift.amplitude,
                    s.lift.frequency
                ),
                Err(e) => println!("       {}: {e}", v.name()),
            }
        }
    }
    let failed: Vec<&str> = r.results.iter().filter(|(_, ok)| !ok).map(|(id, _)| id.as_str()).collect();
    println!(
        "acceptance: {} of {} criteria passed{}",
        r.results.len() - failed.len(),
        r.results.len(),
        if failed.is_empty() { String::new() } else { format!("; failed: {}", failed.join(", ")) }
    );
}

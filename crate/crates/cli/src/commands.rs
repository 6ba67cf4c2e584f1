use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::Rng;

use hybrid_ecct::channel::{sigma_from_ebn0, ChannelSample};
use hybrid_ecct::code::{load_parity_matrix, save_dense, Code, MatrixFormat, Word};
use hybrid_ecct::ecct::{EcctConfig, EcctModel};
use hybrid_ecct::hdd::{decoder_for, estimate_profile, HardDecoder};
use hybrid_ecct::hybrid::{HardDecisionDecoder, PipelineConfig, SoftDecoder};
use hybrid_ecct::loss::{bound_check, lemma1_oracle};
use hybrid_ecct::rng::{domain, substream};
use hybrid_ecct::sim::{
    run_ablation, run_fer, run_histogram, AblationModels, CodewordMode, Stopping, Z99,
};
use hybrid_ecct::tensorgrad::Checkpoint;
use hybrid_ecct::train::{train, LossMode, TrainConfig};

use crate::settings::{write_sidecar, Settings};
use crate::{
    AblateArgs, CodeArgs, CodegenArgs, Command, EvalArgs, HistArgs, ModelArgs, OracleArgs, Outcome,
    ProfileArgs, StopArgs, TrainArgs, UsageError,
};

pub fn run(command: Command, config: Option<&Path>) -> Result<Outcome> {
    let mut s = Settings::load(config)?;
    match command {
        Command::Codegen(a) => codegen(&mut s, a),
        Command::Train(a) => train_cmd(&mut s, a),
        Command::Eval(a) => eval(&mut s, a),
        Command::Hist(a) => hist(&mut s, a),
        Command::Ablate(a) => ablate(&mut s, a),
        Command::Profile(a) => profile(&mut s, a),
        Command::Oracle(a) => oracle(&mut s, a),
    }
    .and_then(|(name, out, outcome)| {
        let resolved = s.finish()?;
        write_sidecar(&out, name, &resolved)?;
        Ok(outcome)
    })
}

type Done = (&'static str, PathBuf, Outcome);

fn required<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| UsageError::new(format!("--{flag} is required")).into())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn load_code(s: &mut Settings, a: CodeArgs) -> Result<Code> {
    let h = s.path("h", a.h)?;
    let d_min = s.opt("d_min", a.d_min)?;
    if let Some(h) = h {
        let format: MatrixFormat = s.get("h_format", a.h_format, "dense".to_string())?.parse()?;
        let file = File::open(&h).with_context(|| format!("cannot open {}", h.display()))?;
        return Ok(load_parity_matrix(BufReader::new(file), format, d_min)?);
    }
    let m = required(s.opt("m", a.m)?, "m (or --h)")?;
    let t = required(s.opt("t", a.t)?, "t")?;
    Ok(Code::bch(m, t)?)
}

fn model_config(s: &mut Settings, a: ModelArgs) -> Result<(EcctConfig, u64)> {
    let d = EcctConfig::default();
    let config = EcctConfig {
        n_layers: s.get("layers", a.layers, d.n_layers)?,
        embed_dim: s.get("dim", a.dim, d.embed_dim)?,
        n_heads: s.get("heads", a.heads, d.n_heads)?,
        ffn_mult: s.get("ffn_mult", a.ffn_mult, d.ffn_mult)?,
        activation: s.get("activation", a.activation, d.activation.to_string())?.parse()?,
    };
    Ok((config, s.get("init_seed", a.init_seed, 0)?))
}

/// Loads a checkpoint and the loss it was trained with, if recorded.
fn load_model(path: &Path, code: &Code) -> Result<(EcctModel, Option<LossMode>)> {
    let file = File::open(path).with_context(|| format!("cannot open checkpoint {}", path.display()))?;
    let ckpt = Checkpoint::read(&mut BufReader::new(file))?;
    let model = EcctModel::from_checkpoint(&ckpt, code)
        .with_context(|| format!("checkpoint {}", path.display()))?;
    let mode = ckpt.header.get("loss_mode").map(|m| m.parse()).transpose()?;
    Ok((model, mode))
}

/// Hybrid losses are gated for one pipeline; using the model in another is
/// rejected.
fn check_trained_for(path: &Path, mode: Option<LossMode>, config: PipelineConfig) -> Result<()> {
    match mode {
        None | Some(LossMode::Bce) => Ok(()),
        Some(m) if m.uses_pre() == config.use_pre && m.uses_post() == config.use_post => Ok(()),
        Some(m) => bail!(UsageError::new(format!(
            "{} was trained with loss {m}, which targets a different pipeline than {config}",
            path.display()
        ))),
    }
}

fn stopping(s: &mut Settings, a: &StopArgs) -> Result<(Stopping, CodewordMode, bool)> {
    let d = Stopping::default();
    let stop = Stopping {
        min_frame_errors: s.get("min_errors", a.min_errors, d.min_frame_errors)?,
        max_frames: s.get("max_frames", a.max_frames, d.max_frames)?,
        chunk: d.chunk,
    };
    let mode = if s.switch("zero_codeword", a.zero_codeword, false)? {
        CodewordMode::Zero
    } else {
        CodewordMode::Random
    };
    let timing = s.switch("timing", a.timing, false)?;
    Ok((stop, mode, timing))
}

fn codegen(s: &mut Settings, a: CodegenArgs) -> Result<Done> {
    let m = required(s.opt("m", a.m)?, "m")?;
    let t = required(s.opt("t", a.t)?, "t")?;
    let dir = required(s.path("out", a.out)?, "out")?;
    let code = Code::bch(m, t)?;
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let (n, k) = (code.n(), code.k());
    let h_path = dir.join(format!("bch_{n}_{k}.h.txt"));
    let g_path = dir.join(format!("bch_{n}_{k}.g.txt"));
    let mut h = create(&h_path)?;
    save_dense(&mut h, n, k, code.parity_check())?;
    h.flush()?;
    let mut g = create(&g_path)?;
    save_dense(&mut g, n, k, code.generator())?;
    g.flush()?;
    println!("BCH({n},{k}) d_min={} t_c={}: {} {}", code.d_min(), code.t_c(), h_path.display(), g_path.display());
    Ok(("codegen", h_path, Outcome::Ok))
}

fn train_cmd(s: &mut Settings, a: TrainArgs) -> Result<Done> {
    let code = load_code(s, a.code)?;
    let (model_cfg, init_seed) = model_config(s, a.model)?;
    let d = TrainConfig::default();
    let cfg = TrainConfig {
        batch_size: s.get("batch_size", a.batch_size, d.batch_size)?,
        steps: s.get("steps", a.steps, d.steps)?,
        lr: s.get("lr", a.lr, d.lr)?,
        snr_low_db: s.get("snr_low", a.snr_low, d.snr_low_db)?,
        snr_high_db: s.get("snr_high", a.snr_high, d.snr_high_db)?,
        seed: s.get("seed", a.seed, d.seed)?,
        loss_mode: s.get("loss", a.loss, d.loss_mode.to_string())?.parse()?,
        ste_temperature: s.get("ste_temperature", a.ste_temperature, d.ste_temperature)?,
        gate_source: s.get("gate", a.gate, d.gate_source.to_string())?.parse()?,
        checkpoint_every: s.get("checkpoint_every", a.checkpoint_every, d.checkpoint_every)?,
        ..d
    };
    cfg.validate().map_err(|e| UsageError::new(e.to_string()))?;
    let out = required(s.path("out", a.out)?, "out")?;
    let mut model = EcctModel::new(&code, model_cfg, init_seed)?;
    let report = train(&mut model, &cfg, Some(&out))?;
    let mut log_path = out.as_os_str().to_owned();
    log_path.push(".csv");
    let mut log = create(Path::new(&log_path))?;
    report.write_csv(&mut log)?;
    log.flush()?;
    if let (Some(first), Some(last)) = (report.steps.first(), report.steps.last()) {
        eprintln!(
            "{} steps in {:.1}s: loss {:.4} -> {:.4}, retained fraction {:.3}",
            report.steps.len(),
            report.wall_seconds,
            first.loss,
            last.loss,
            report.retained_fraction()
        );
    }
    Ok(("train", out, Outcome::Ok))
}

fn eval(s: &mut Settings, a: EvalArgs) -> Result<Done> {
    let code = load_code(s, a.code)?;
    let hdd = decoder_for(&code)?;
    let p = &a.pipeline;
    let config = PipelineConfig {
        use_pre: s.switch("pre", p.pre, p.no_pre)?,
        use_post: s.switch("post", p.post, p.no_post)?,
    };
    let grid = s.list("snr", a.stop.snr.clone(), "2,3,4,5,6")?;
    let (stop, mode, timing) = stopping(s, &a.stop)?;
    let seed = s.get("seed", a.seed, 0)?;
    let out = required(s.path("out", a.out)?, "out")?;
    let model = match s.path("checkpoint", a.checkpoint)? {
        Some(path) => {
            let (model, trained) = load_model(&path, &code)?;
            check_trained_for(&path, trained, config)?;
            Some(model)
        }
        None => None,
    };
    let soft: &dyn SoftDecoder = match &model {
        Some(m) => m,
        None => &HardDecisionDecoder,
    };
    let report = run_fer(config, hdd.as_ref(), soft, &grid, &stop, seed, mode)?;
    let mut w = create(&out)?;
    report.write_csv(&mut w, timing)?;
    w.flush()?;
    for pt in &report.points {
        println!("{config} {:>5} dB  FER {:.3e}  ({} / {})", pt.ebn0_db, pt.fer, pt.frame_errors, pt.frames);
    }
    Ok(("eval", out, Outcome::Ok))
}

fn hist(s: &mut Settings, a: HistArgs) -> Result<Done> {
    let code = load_code(s, a.code)?;
    let path = required(s.path("checkpoint", a.checkpoint)?, "checkpoint")?;
    let snr = s.get("snr", a.snr, 4.0)?;
    let frames = s.get("frames", a.frames, 100_000)?;
    let seed = s.get("seed", a.seed, 0)?;
    let out = required(s.path("out", a.out)?, "out")?;
    let (model, _) = load_model(&path, &code)?;
    let h = run_histogram(&model, &code, snr, frames, seed)?;
    let mut w = create(&out)?;
    h.write_csv(&mut w)?;
    w.flush()?;
    println!(
        "within t_c: {} frames, beyond t_c: {} frames, rescuable by post: {}",
        h.within.total(),
        h.beyond.total(),
        h.within.rescuable() + h.beyond.rescuable()
    );
    Ok(("hist", out, Outcome::Ok))
}

fn ablate(s: &mut Settings, a: AblateArgs) -> Result<Done> {
    let code = load_code(s, a.code)?;
    let hdd = decoder_for(&code)?;
    let grid = s.list("snr", a.stop.snr.clone(), "6,7,8")?;
    let (stop, mode, _) = stopping(s, &a.stop)?;
    let seed = s.get("seed", a.seed, 0)?;
    let out = required(s.path("out", a.out)?, "out")?;
    let base_path = required(s.path("checkpoint", a.checkpoint)?, "checkpoint")?;
    let load = |path: &Path, expected: LossMode| -> Result<EcctModel> {
        let (model, trained) = load_model(path, &code)?;
        if let Some(m) = trained {
            if m != expected {
                bail!(UsageError::new(format!(
                    "{} was trained with loss {m}, expected {expected}",
                    path.display()
                )));
            }
        }
        Ok(model)
    };
    let base = load(&base_path, LossMode::Bce)?;
    let post = s
        .path("hybrid_post", a.hybrid_post)?
        .map(|p| load(&p, LossMode::HybridPost))
        .transpose()?;
    let pre_post = s
        .path("hybrid_pre_post", a.hybrid_pre_post)?
        .map(|p| load(&p, LossMode::HybridPrePost))
        .transpose()?;
    let models = AblationModels {
        base: &base,
        hybrid_post: post.as_ref().map(|m| m as &dyn SoftDecoder),
        hybrid_pre_post: pre_post.as_ref().map(|m| m as &dyn SoftDecoder),
    };
    let table = run_ablation(hdd.as_ref(), models, &grid, &stop, seed, mode)?;
    let mut w = create(&out)?;
    table.write_csv(&mut w)?;
    w.flush()?;
    for (label, pts) in table.labels.iter().zip(&table.points) {
        let fers: Vec<String> = pts.iter().map(|p| format!("{:.3e}", p.fer)).collect();
        println!("{label:<20} {}", fers.join("  "));
    }
    Ok(("ablate", out, Outcome::Ok))
}

fn profile(s: &mut Settings, a: ProfileArgs) -> Result<Done> {
    let code = load_code(s, a.code)?;
    let hdd = decoder_for(&code)?;
    let grid = s.list("snr", a.snr, "2,3,4,5,6")?;
    let frames = s.get("frames", a.frames, 100_000)?;
    let seed = s.get("seed", a.seed, 0)?;
    let out = required(s.path("out", a.out)?, "out")?;
    let mut w = create(&out)?;
    writeln!(w, "ebn0_db,sigma,frames,p_bu,p_dd,p_beyond")?;
    for (i, &snr) in grid.iter().enumerate() {
        let sigma = sigma_from_ebn0(snr, code.rate())?;
        let p = estimate_profile(hdd.as_ref(), sigma, frames, seed.wrapping_add(i as u64))?;
        writeln!(w, "{snr},{:e},{},{:e},{:e},{:e}", sigma, p.frames, p.p_bu, p.p_dd, p.p_beyond)?;
    }
    w.flush()?;
    Ok(("profile", out, Outcome::Ok))
}

fn oracle(s: &mut Settings, a: OracleArgs) -> Result<Done> {
    let code = load_code(s, a.code)?;
    let hdd = decoder_for(&code)?;
    let inner_kind = s.get("inner", a.inner, "hdd".to_string())?;
    let grid = s.list("snr", a.snr, "3")?;
    let frames = s.get("frames", a.frames, 100_000)?;
    let z = s.get("z", a.z, Z99)?;
    let vectors = s.get("bound_vectors", a.bound_vectors, 1000)?;
    let seed = s.get("seed", a.seed, 0)?;
    let out = required(s.path("out", a.out)?, "out")?;
    let model = match inner_kind.as_str() {
        "identity" | "hdd" => None,
        "ecct" => Some(match s.path("checkpoint", a.checkpoint)? {
            Some(path) => load_model(&path, &code)?.0,
            None => {
                let (cfg, init_seed) = model_config(s, a.model)?;
                EcctModel::new(&code, cfg, init_seed)?
            }
        }),
        other => bail!(UsageError::new(format!("unknown inner decoder {other:?}"))),
    };
    let hdd_ref: &dyn HardDecoder = hdd.as_ref();
    let inner = |sample: &ChannelSample| -> hybrid_ecct::Result<Word> {
        match &model {
            Some(m) => m.decode(&sample.received),
            None if inner_kind == "hdd" => Ok(hdd_ref.decode(&sample.hard_decision()).word),
            None => Ok(sample.hard_decision()),
        }
    };
    let mut violations = Vec::new();
    let mut w = create(&out)?;
    writeln!(
        w,
        "ebn0_db,frames,lhs_mean,lhs_ci_low,lhs_ci_high,rhs_mean,rhs_ci_low,rhs_ci_high,p_dd,p_bu,disagreeing_frames,overlap"
    )?;
    for (i, &snr) in grid.iter().enumerate() {
        let sigma = sigma_from_ebn0(snr, code.rate())?;
        let r = lemma1_oracle(hdd_ref, &inner, sigma, frames, seed.wrapping_add(i as u64), z)?;
        writeln!(
            w,
            "{snr},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{}",
            r.frames,
            r.lhs.mean,
            r.lhs.ci_low,
            r.lhs.ci_high,
            r.rhs.mean,
            r.rhs.ci_low,
            r.rhs.ci_high,
            r.p_dd,
            r.p_bu,
            r.disagreeing_frames,
            r.intervals_overlap()
        )?;
        println!(
            "{snr} dB: lhs {:.4e} [{:.4e}, {:.4e}]  rhs {:.4e} [{:.4e}, {:.4e}]",
            r.lhs.mean, r.lhs.ci_low, r.lhs.ci_high, r.rhs.mean, r.rhs.ci_low, r.rhs.ci_high
        );
        if !r.intervals_overlap() {
            violations.push(format!("decomposition intervals disjoint at {snr} dB"));
        }
    }
    w.flush()?;
    let bound_failures = bound_violations(code.n(), vectors, seed)?;
    println!("bound check: {bound_failures} violations");
    if bound_failures > 0 {
        violations.push(format!("logistic bound violated {bound_failures} times"));
    }
    let outcome = if violations.is_empty() {
        Outcome::Ok
    } else {
        Outcome::Violation(violations.join("; "))
    };
    Ok(("oracle", out, outcome))
}

/// Counts bound failures on a 10^4-point grid over [-20, 20] and on
/// `vectors` random score/target vectors of length `n`.
fn bound_violations(n: usize, vectors: u64, seed: u64) -> Result<u64> {
    let mut failures = 0;
    for i in 0..10_000 {
        let a = -20.0 + 40.0 * i as f64 / 9_999.0;
        failures += !bound_check(&[a], &[1.0])?.holds() as u64;
    }
    for v in 0..vectors {
        let mut rng = substream(seed, domain::BOUND_CHECK, v);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(-20.0..20.0)).collect();
        let target: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        failures += !bound_check(&scores, &target)?.holds() as u64;
    }
    Ok(failures)
}

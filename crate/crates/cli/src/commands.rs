use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use aespace::data::{load_frames, score_histogram};
use aespace::ranker::{
    embed_scores, kendall_tau, pairwise_agreement, projection_score, RankedList,
};
use aespace::sampler::{estimate_cardinality, write_triplets_csv, Sampler, SamplerConfig};
use aespace::synth::{generate, SynthConfig};
use aespace::trainer::{train, TrainConfig};
use aespace::video::{
    detect_peaks, kalman_smooth, score_sequence, write_video_csv, KalmanConfig, PeakConfig,
};
use aespace::{Dataset, EncoderParams, LossConfig};
use anyhow::{bail, Context};
use serde::Serialize;
use serde_json::json;

use crate::metadata::{sidecar_path, Run};
use crate::{
    Command, EmbedArgs, EvalArgs, RankArgs, SampleArgs, ScoreArgs, SynthArgs, TrainArgs, Truth,
    VideoArgs,
};

pub fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Score(a) => score(a),
        Command::Sample(a) => sample(a),
        Command::Train(a) => train_cmd(a),
        Command::Embed(a) => embed(a),
        Command::Rank(a) => rank(a),
        Command::Eval(a) => eval(a),
        Command::Video(a) => video(a),
    }
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_with(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> anyhow::Result<()> {
    let mut w = create(path)?;
    f(&mut w)
        .and_then(|_| w.flush())
        .with_context(|| format!("writing {}", path.display()))
}

/// Loads a dataset, reporting rejected lines on stderr.
fn load_dataset(path: &Path) -> anyhow::Result<(Dataset, usize)> {
    let loaded = Dataset::load(path)?;
    for r in &loaded.rejections {
        eprintln!(
            "warning: {}:{}: rejected: {}",
            path.display(),
            r.line,
            r.reason
        );
    }
    if loaded.dataset.is_empty() {
        bail!("{}: no valid records", path.display());
    }
    Ok((loaded.dataset, loaded.rejections.len()))
}

fn synth(a: SynthArgs) -> anyhow::Result<()> {
    let run = Run::start("synth");
    let config = SynthConfig {
        n: a.n,
        d_in: a.din,
        noise_sigma: a.noise,
        seed: a.seed.seed,
        view_range: (a.view_lo, a.view_hi),
    };
    let synthetic = generate(&config)?;
    synthetic.dataset.save(&a.out)?;
    let sidecar = sidecar_path(&a.out, "synth.json");
    synthetic.write_sidecar(&config, &sidecar)?;
    run.finish(
        &a.out,
        &config,
        json!({ "seed": config.seed }),
        &[],
        &[&a.out, &sidecar],
        json!({ "records": synthetic.dataset.len() }),
    )
}

fn score(a: ScoreArgs) -> anyhow::Result<()> {
    let run = Run::start("score");
    let (ds, rejected) = load_dataset(&a.input)?;
    write_with(&a.out, |w| {
        writeln!(w, "id,score")?;
        for r in ds.records() {
            writeln!(w, "{},{}", r.id, r.score().value())?;
        }
        Ok(())
    })?;
    let mut outputs = vec![a.out.as_path()];
    if let Some(hist_out) = &a.hist_out {
        let hist = score_histogram(&ds, a.bins)?;
        write_with(hist_out, |w| hist.write_csv(w))?;
        outputs.push(hist_out);
    }
    run.finish(
        &a.out,
        json!({ "bins": a.bins }),
        json!({}),
        &[&a.input],
        &outputs,
        json!({ "records": ds.len(), "rejected": rejected }),
    )
}

fn sample(a: SampleArgs) -> anyhow::Result<()> {
    let run = Run::start("sample");
    let (ds, _) = load_dataset(&a.input)?;
    let config = SamplerConfig {
        alpha: a.alpha,
        beta: a.beta,
        seed: a.seed.seed,
        pair_ref: a.pair_ref,
        budget: a.budget,
    };
    let mut sampler = Sampler::new(config)?;
    let scores = ds.scores();
    let triplets = (0..a.count)
        .map(|_| sampler.sample(&scores))
        .collect::<aespace::Result<Vec<_>>>()?;
    write_with(&a.out, |w| write_triplets_csv(&triplets, w))?;
    let stats = sampler.stats();
    run.finish(
        &a.out,
        json!({ "sampler": config, "count": a.count }),
        json!({ "seed": config.seed }),
        &[&a.input],
        &[&a.out],
        json!({
            "proposed": stats.proposed,
            "accepted": stats.accepted,
            "acceptance_rate": stats.acceptance_rate(),
            "estimated_cardinality": estimate_cardinality(ds.len(), stats),
        }),
    )
}

fn parse_hidden(items: &[String]) -> anyhow::Result<Vec<usize>> {
    items
        .iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| aespace::Error::Config(format!("invalid hidden width {s:?}")).into())
        })
        .collect()
}

fn train_cmd(a: TrainArgs) -> anyhow::Result<()> {
    let run = Run::start("train");
    let (ds, _) = load_dataset(&a.input)?;
    let defaults = TrainConfig::default();
    let config = TrainConfig {
        hidden: parse_hidden(&a.hidden)?,
        embed_dim: a.embed_dim,
        lr_init: a.lr,
        batch_size: a.batch,
        max_steps: a.steps,
        seed: a.seed.seed,
        loss: LossConfig {
            margin_m: a.margin,
            margin_md: a.dir_margin,
            directional_enabled: !a.no_directional,
            literal_sign_form: a.literal_sign,
        },
        sampler: SamplerConfig {
            alpha: a.alpha,
            beta: a.beta,
            pair_ref: a.pair_ref,
            ..defaults.sampler
        },
        ..defaults
    };
    let (params, log) = train(&ds, &config)?;
    params.save(&a.model_out)?;
    write_with(&a.log_out, |w| log.write_csv(w))?;
    run.finish(
        &a.model_out,
        &config,
        json!({
            "seed": config.seed,
            "encoder": aespace::rng::derive_seed(config.seed, 1),
            "sampler": aespace::rng::derive_seed(config.seed, 2),
        }),
        &[&a.input],
        &[&a.model_out, &a.log_out],
        json!({
            "steps_run": log.steps_run,
            "final_lr": log.final_lr,
            "final_mean_loss": log.windows.last().map(|w| w.mean_loss),
            "proposed": log.sampler.proposed,
            "accepted": log.sampler.accepted,
            "acceptance_rate": log.sampler.acceptance_rate(),
        }),
    )
}

#[derive(Serialize)]
struct EmbeddingLine<'a> {
    id: &'a str,
    score: f64,
    embedding: &'a [f64],
}

fn embed(a: EmbedArgs) -> anyhow::Result<()> {
    let run = Run::start("embed");
    let params = EncoderParams::load(&a.model)?;
    let (ds, _) = load_dataset(&a.input)?;
    let mut w = create(&a.out)?;
    for r in ds.records() {
        let phi = params.forward(&r.features)?;
        let line = EmbeddingLine {
            id: &r.id,
            score: projection_score(&phi),
            embedding: &phi,
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    run.finish(
        &a.out,
        json!({}),
        json!({}),
        &[&a.model, &a.input],
        &[&a.out],
        json!({ "records": ds.len(), "embed_dim": params.d_out() }),
    )
}

fn rank(a: RankArgs) -> anyhow::Result<()> {
    let run = Run::start("rank");
    let params = EncoderParams::load(&a.model)?;
    let (ds, _) = load_dataset(&a.input)?;
    let ranked = aespace::ranker::rank_collection(&params, &ds)?;
    write_with(&a.out, |w| ranked.write_csv(w))?;
    run.finish(
        &a.out,
        json!({}),
        json!({}),
        &[&a.model, &a.input],
        &[&a.out],
        json!({ "records": ds.len() }),
    )
}

fn eval(a: EvalArgs) -> anyhow::Result<()> {
    let run = Run::start("eval");
    let params = EncoderParams::load(&a.model)?;
    let (ds, _) = load_dataset(&a.input)?;
    let truth: Vec<f64> = match a.truth {
        Truth::Score => ds.scores().iter().map(|s| s.value()).collect(),
        Truth::Latent => ds
            .latent_scores()
            .context("--truth latent needs latent_score on every record")?,
    };
    let proj = embed_scores(&params, &ds)?;
    let table = pairwise_agreement(&proj, &truth, &a.thresholds).map_err(|e| match e {
        aespace::Error::Input(msg) => aespace::Error::Config(msg),
        other => other,
    })?;
    write_with(&a.out, |w| table.write_csv(w))?;
    let ids = || ds.records().iter().map(|r| r.id.clone());
    let by_proj = RankedList::from_scores(ids().zip(proj.iter().copied()).collect());
    let by_truth = RankedList::from_scores(ids().zip(truth.iter().copied()).collect());
    let tau = kendall_tau(&by_proj.ids(), &by_truth.ids())?;
    let truth_name = match a.truth {
        Truth::Score => "score",
        Truth::Latent => "latent",
    };
    run.finish(
        &a.out,
        json!({ "thresholds": a.thresholds, "truth": truth_name }),
        json!({}),
        &[&a.model, &a.input],
        &[&a.out],
        json!({ "records": ds.len(), "kendall_tau": tau }),
    )
}

fn video(a: VideoArgs) -> anyhow::Result<()> {
    let run = Run::start("video");
    let params = EncoderParams::load(&a.model)?;
    let frames = load_frames(&a.frames)?;
    if frames.is_empty() {
        bail!("{}: no frames", a.frames.display());
    }
    let kalman = KalmanConfig {
        q: a.q,
        r: a.r,
        p0: a.p0,
        ..Default::default()
    };
    let peaks_cfg = PeakConfig {
        min_separation: a.min_sep,
        min_prominence: a.min_prom,
    };
    let features: Vec<Vec<f64>> = frames.into_iter().map(|f| f.features).collect();
    let raw = score_sequence(&params, &features)?;
    let smoothed = kalman_smooth(&raw, &kalman)?;
    let peaks = detect_peaks(&smoothed, &peaks_cfg)?;
    write_with(&a.out, |w| write_video_csv(&raw, &smoothed, &peaks, w))?;
    run.finish(
        &a.out,
        json!({ "kalman": kalman, "peaks": peaks_cfg }),
        json!({}),
        &[&a.model, &a.frames],
        &[&a.out],
        json!({ "frames": raw.len(), "peaks": peaks }),
    )
}

//! Joint training of all encoder/decoder pairs and model evaluation.
//!
//! One iteration: every pair encodes its own distinct image batch, the
//! power-normalized rows superpose through one freshly drawn channel
//! realization, each decoder recovers its pair's batch from the equalized
//! mixture, and the mean of the per-pair reconstruction errors is minimized
//! with Adam. Mutual orthogonality of the transmitted rows is not imposed
//! anywhere; it emerges because it is the only way every decoder can
//! shed the other pairs' interference.
//!
//! All randomness is drawn from streams addressed by (seed, purpose,
//! counter), so a run is a pure function of its configuration: reruns are
//! byte-identical and a resumed run continues the exact trajectory of an
//! uninterrupted one.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::adam::AdamState;
use crate::autodiff::{Graph, NodeId};
use crate::channel::{self, ChannelRealization, ScenarioKind};
use crate::data::{denormalize, ImageSet};
use crate::error::{Error, Result};
use crate::metrics;
use crate::model::{complex_to_row, row_to_complex, BoundNet, DmaNet};
use crate::rng::{self, Purpose};
use crate::tensor::Tensor;

/// How per-pair channel SNR targets are chosen each iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum SnrPolicy {
    /// One fixed target per pair, in dB.
    Fixed(Vec<f64>),
    /// Independent uniform draw in [lo, hi] dB per pair per iteration, so
    /// the SNR-conditioned attention blocks see the whole range.
    UniformDb { lo: f64, hi: f64 },
}

impl SnrPolicy {
    fn validate(&self, n: usize) -> Result<()> {
        match self {
            SnrPolicy::Fixed(v) => {
                if v.len() != n {
                    return Err(Error::contract(format!(
                        "snr policy: {} targets for {} pairs",
                        v.len(),
                        n
                    )));
                }
                if v.iter().any(|s| !s.is_finite()) {
                    return Err(Error::contract("snr policy: targets must be finite".into()));
                }
            }
            SnrPolicy::UniformDb { lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() || lo > hi {
                    return Err(Error::contract(format!(
                        "snr policy: invalid range [{lo}, {hi}] dB"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Midpoint of the policy: the default SNR for validation passes.
    pub fn validation_default(&self) -> f64 {
        match self {
            SnrPolicy::Fixed(v) => v.iter().sum::<f64>() / v.len().max(1) as f64,
            SnrPolicy::UniformDb { lo, hi } => 0.5 * (lo + hi),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Images per pair per iteration.
    pub batch: usize,
    /// Epochs to run in total.
    pub epochs: usize,
    /// (first epoch, learning rate) steps; first entry must start at 0,
    /// epochs strictly increasing.
    pub lr_schedule: Vec<(usize, f64)>,
    pub snr: SnrPolicy,
    /// Channel family trained against. Structured kinds (downlink, uplink)
    /// train on independent fading; one model serves all of them.
    pub kind: ScenarioKind,
    pub seed: u64,
    /// SNR used for validation passes.
    pub val_snr_db: f64,
    /// Validate every this many epochs (final epoch always validates).
    pub val_every: usize,
}

impl TrainConfig {
    /// Defaults used throughout: batch 64, step schedule
    /// 5e-4 / 1e-4@100 / 5e-5@200, uniform [0, 20] dB training SNR,
    /// independent fading, validation at the 10 dB midpoint.
    pub fn desk(epochs: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            batch: 64,
            epochs,
            lr_schedule: vec![(0, 5e-4), (100, 1e-4), (200, 5e-5)],
            snr: SnrPolicy::UniformDb { lo: 0.0, hi: 20.0 },
            kind: ScenarioKind::D2d,
            seed,
            val_snr_db: 10.0,
            val_every: 1,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.batch == 0 {
            return Err(Error::contract("train config: batch size must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::contract("train config: at least one epoch".into()));
        }
        if self.val_every == 0 {
            return Err(Error::contract("train config: validation cadence must be >= 1".into()));
        }
        if !self.val_snr_db.is_finite() {
            return Err(Error::contract("train config: validation SNR must be finite".into()));
        }
        match self.lr_schedule.as_slice() {
            [] => return Err(Error::contract("train config: empty learning-rate schedule".into())),
            [(first, _), ..] if *first != 0 => {
                return Err(Error::contract(
                    "train config: schedule must define the rate from epoch 0".into(),
                ))
            }
            steps => {
                for pair in steps.windows(2) {
                    if pair[1].0 <= pair[0].0 {
                        return Err(Error::contract(format!(
                            "train config: schedule epochs must increase strictly ({} then {})",
                            pair[0].0, pair[1].0
                        )));
                    }
                }
                if steps.iter().any(|(_, lr)| !lr.is_finite() || *lr < 0.0) {
                    return Err(Error::contract(
                        "train config: learning rates must be finite and >= 0".into(),
                    ));
                }
            }
        }
        self.snr.validate(n)
    }

    /// Rate in force at `epoch`: the last scheduled step at or before it.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let mut lr = self.lr_schedule[0].1;
        for &(e, r) in &self.lr_schedule {
            if e <= epoch {
                lr = r;
            }
        }
        lr
    }

    fn train_kind(&self) -> ScenarioKind {
        match self.kind {
            ScenarioKind::Downlink | ScenarioKind::Uplink => ScenarioKind::D2d,
            k => k,
        }
    }
}

/// One line of training history.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Iterations completed in total after this epoch.
    pub iteration: u64,
    /// Mean training loss over the epoch's iterations.
    pub loss: f64,
    /// Most recent validation PSNR; NaN until the first validation pass
    /// when the cadence skips early epochs.
    pub val_psnr_db: f64,
    pub lr: f64,
}

/// Receives training progress. `on_epoch` returning false stops the run
/// after the current epoch; `on_improved` fires whenever validation PSNR
/// reaches a new best, with the parameters that achieved it.
pub trait TrainSink {
    fn on_epoch(&mut self, record: &EpochRecord) -> bool {
        let _ = record;
        true
    }
    fn on_improved(&mut self, net: &DmaNet, val_psnr_db: f64) {
        let _ = (net, val_psnr_db);
    }
}

impl TrainSink for () {}

const STATE_MAGIC: &[u8; 4] = b"DMTS";
const STATE_VERSION: u32 = 1;

/// Everything needed to continue a run exactly where it stopped. The
/// counters double as the RNG state: every stream is addressed by them, so
/// no generator state needs saving.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub epoch: usize,
    pub iteration: u64,
    pub best_val_psnr_db: f64,
    pub last_val_psnr_db: f64,
    pub adam: AdamState,
}

impl TrainState {
    pub fn new(net: &DmaNet) -> TrainState {
        TrainState {
            epoch: 0,
            iteration: 0,
            best_val_psnr_db: f64::NEG_INFINITY,
            last_val_psnr_db: f64::NAN,
            adam: AdamState::new(&net.param_sizes()),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(STATE_MAGIC);
        out.extend_from_slice(&STATE_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.epoch as u64).to_le_bytes());
        out.extend_from_slice(&self.iteration.to_le_bytes());
        out.extend_from_slice(&self.best_val_psnr_db.to_le_bytes());
        out.extend_from_slice(&self.last_val_psnr_db.to_le_bytes());
        self.adam.to_bytes(&mut out);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<TrainState> {
        let fail = |offset: usize, detail: &'static str| Error::Format { offset, detail };
        if bytes.len() < 8 || &bytes[..4] != STATE_MAGIC {
            return Err(fail(0, "not a training-state file"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != STATE_VERSION {
            return Err(fail(4, "unsupported training-state version"));
        }
        let mut cursor = 8;
        let mut take = |n: usize| -> Result<&[u8]> {
            let end = cursor
                .checked_add(n)
                .filter(|&e| e <= bytes.len())
                .ok_or(fail(cursor, "truncated training state"))?;
            let s = &bytes[cursor..end];
            cursor = end;
            Ok(s)
        };
        let epoch = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let iteration = u64::from_le_bytes(take(8)?.try_into().unwrap());
        let best = f64::from_le_bytes(take(8)?.try_into().unwrap());
        let last = f64::from_le_bytes(take(8)?.try_into().unwrap());
        let adam = AdamState::from_bytes(bytes, &mut cursor)?;
        if cursor != bytes.len() {
            return Err(fail(cursor, "trailing bytes after training state"));
        }
        Ok(TrainState {
            epoch,
            iteration,
            best_val_psnr_db: best,
            last_val_psnr_db: last,
            adam,
        })
    }
}

/// Draws a realization, redrawing (deterministically) while any direct
/// coefficient sits in the equalizer's outage region.
fn sample_live_channel(
    kind: ScenarioKind,
    snrs: &[f64],
    p_z: f64,
    seed: u64,
) -> Result<ChannelRealization> {
    for attempt in 0..100u64 {
        let s = if attempt == 0 { seed } else { rng::derive(seed, Purpose::Csi, attempt) };
        let ch = ChannelRealization::sample(kind, snrs, p_z, s)?;
        if !ch.has_deep_fade() {
            return Ok(ch);
        }
    }
    Err(Error::Degenerate("channel sampling: persistent deep fade"))
}

fn check_disjoint(index_batches: &[Vec<usize>]) -> Result<()> {
    let mut all: Vec<usize> = index_batches.iter().flatten().copied().collect();
    all.sort_unstable();
    if all.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::contract(
            "training batches must not share any sample index".into(),
        ));
    }
    Ok(())
}

/// Records the full forward pass of one iteration over an explicit channel
/// realization and returns the graph, the parameter binding, and the loss
/// node (mean of per-pair MSEs). Exposed so tests can drive the exact
/// training path with hand-built channels.
pub fn iteration_loss_graph(
    net: &DmaNet,
    set: &ImageSet,
    index_batches: &[Vec<usize>],
    snrs: &[f64],
    ch: &ChannelRealization,
    kind: ScenarioKind,
) -> Result<(Graph, BoundNet, NodeId)> {
    let n = net.n();
    if index_batches.len() != n || snrs.len() != n || ch.n() != n {
        return Err(Error::contract(format!(
            "iteration: {} batches / {} snrs / channel for {} vs {} pairs",
            index_batches.len(),
            snrs.len(),
            ch.n(),
            n
        )));
    }
    let b = index_batches[0].len();
    if b == 0 || index_batches.iter().any(|ib| ib.len() != b) {
        return Err(Error::contract("iteration: batches must share one nonzero size".into()));
    }
    check_disjoint(index_batches)?;
    let mut g = Graph::new(ch.seed());
    let bound = net.bind(&mut g);
    let mut images = Vec::with_capacity(n);
    let mut ssvs = Vec::with_capacity(n);
    for k in 0..n {
        let x = g.input(set.batch(&index_batches[k])?);
        let z = net.encode(&mut g, &bound, k, x, snrs[k])?;
        images.push(x);
        ssvs.push(z);
    }
    let rxs = channel::transmit_graph(&mut g, &ssvs, ch, kind)?;
    let mut total: Option<NodeId> = None;
    for k in 0..n {
        let eq = channel::equalize_graph(&mut g, rxs[k], ch.h_direct(k))?;
        let out = net.decode(&mut g, &bound, k, eq, snrs[k])?;
        let l = g.mse(out, images[k])?;
        total = Some(match total {
            Some(t) => g.add(t, l)?,
            None => l,
        });
    }
    let loss = g.scale(total.expect("at least one pair"), 1.0 / n as f64)?;
    Ok((g, bound, loss))
}

/// One optimizer step: fresh channel draw, forward, backward, Adam update.
/// Returns the loss. The index batches must be pairwise disjoint.
#[allow(clippy::too_many_arguments)]
pub fn train_iteration(
    net: &mut DmaNet,
    adam: &mut AdamState,
    set: &ImageSet,
    index_batches: &[Vec<usize>],
    snrs: &[f64],
    kind: ScenarioKind,
    channel_seed: u64,
    lr: f64,
) -> Result<f64> {
    let ch = sample_live_channel(kind, snrs, net.arch().p_z, channel_seed)?;
    let (mut g, bound, loss) = iteration_loss_graph(net, set, index_batches, snrs, &ch, kind)?;
    let loss_val = g.value(loss).item()?;
    if !loss_val.is_finite() {
        return Err(Error::NonFinite(format!("training loss became {loss_val}")));
    }
    g.backward(loss)?;
    let grads: Vec<&Tensor> = bound
        .param_ids()
        .iter()
        .map(|id| g.grad(*id).expect("bound parameters always get gradients"))
        .collect();
    adam.step(net.params_mut(), &grads, lr)?;
    Ok(loss_val)
}

/// Per-pair and average reconstruction quality.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub avg_psnr_db: f64,
    pub per_edp_psnr_db: Vec<f64>,
}

/// Transmits the test set (tuples of N consecutive images, one per pair)
/// over `draws` independent channel realizations and reports mean PSNR per
/// pair and overall. Deterministic in `seed`.
pub fn evaluate(
    net: &DmaNet,
    set: &ImageSet,
    snr_db: f64,
    kind: ScenarioKind,
    draws: usize,
    seed: u64,
) -> Result<EvalReport> {
    let n = net.n();
    let groups = set.count() / n;
    if groups == 0 {
        return Err(Error::contract(format!(
            "evaluation needs at least {} images, set holds {}",
            n,
            set.count()
        )));
    }
    if draws == 0 {
        return Err(Error::contract("evaluation needs at least one channel draw".into()));
    }
    let flen = net.arch().feature_len();
    // Encoder outputs do not depend on the channel draw: encode once.
    let mut rows: Vec<Vec<Vec<Complex64>>> = Vec::with_capacity(n);
    {
        let mut g = Graph::new(0);
        let bound = net.bind_frozen(&mut g);
        for k in 0..n {
            let indices: Vec<usize> = (0..groups).map(|gi| gi * n + k).collect();
            let x = g.input(set.batch(&indices)?);
            let z = net.encode(&mut g, &bound, k, x, snr_db)?;
            rows.push(g.value(z).data().chunks_exact(flen).map(row_to_complex).collect());
        }
    }
    let snrs = vec![snr_db; n];
    let mut psnr_sum = vec![0.0f64; n];
    for d in 0..draws {
        let draw_seed = rng::derive(seed, Purpose::Eval, d as u64);
        let mut equalized: Vec<Vec<f64>> = vec![Vec::with_capacity(groups * flen); n];
        for gi in 0..groups {
            let ch = sample_live_channel(
                kind,
                &snrs,
                net.arch().p_z,
                rng::derive(draw_seed, Purpose::Eval, gi as u64),
            )?;
            let ssvs: Vec<Vec<Complex64>> = (0..n).map(|k| rows[k][gi].clone()).collect();
            let rx = channel::transmit(&ssvs, &ch, kind)?;
            for k in 0..n {
                let eq = channel::equalize(&rx[k], ch.h_direct(k))?;
                equalized[k].extend_from_slice(&complex_to_row(&eq));
            }
        }
        for k in 0..n {
            let mut g = Graph::new(0);
            let bound = net.bind_frozen(&mut g);
            let feats = g.input(Tensor::new(vec![groups, flen], equalized[k].clone())?);
            let out = net.decode(&mut g, &bound, k, feats, snr_db)?;
            let per_image = g.value(out).len() / groups;
            let decoded = denormalize(g.value(out));
            for gi in 0..groups {
                let original = set.image(gi * n + k);
                let img = &decoded[gi * per_image..(gi + 1) * per_image];
                psnr_sum[k] += metrics::psnr_u8(original, img)?;
            }
        }
    }
    let per_edp: Vec<f64> =
        psnr_sum.iter().map(|s| s / (groups * draws) as f64).collect();
    let avg = metrics::avg_psnr(&per_edp)?;
    Ok(EvalReport { avg_psnr_db: avg, per_edp_psnr_db: per_edp })
}

/// Runs epochs `state.epoch..cfg.epochs`, mutating `net` and `state` in
/// place and returning one record per completed epoch. Aborts with a
/// non-finite error if the loss or a fresh validation PSNR leaves the
/// reals.
pub fn run_epochs<S: TrainSink>(
    net: &mut DmaNet,
    train_set: &ImageSet,
    val_set: &ImageSet,
    cfg: &TrainConfig,
    state: &mut TrainState,
    sink: &mut S,
) -> Result<Vec<EpochRecord>> {
    let n = net.n();
    cfg.validate(n)?;
    let iters = train_set.count() / (n * cfg.batch);
    if iters == 0 {
        return Err(Error::contract(format!(
            "training set of {} images cannot fill {} batches of {}",
            train_set.count(),
            n,
            cfg.batch
        )));
    }
    if val_set.count() < n {
        return Err(Error::contract(format!(
            "validation set of {} images is smaller than {} pairs",
            val_set.count(),
            n
        )));
    }
    let kind = cfg.train_kind();
    let mut history = Vec::new();
    for epoch in state.epoch..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        let perm = {
            let mut r = rng::stream(cfg.seed, Purpose::Shuffle, epoch as u64);
            rng::permutation(train_set.count(), &mut r)
        };
        let mut loss_sum = 0.0;
        for it in 0..iters {
            let snrs: Vec<f64> = match &cfg.snr {
                SnrPolicy::Fixed(v) => v.clone(),
                SnrPolicy::UniformDb { lo, hi } => {
                    let mut r = rng::stream(cfg.seed, Purpose::SnrDraw, state.iteration);
                    (0..n).map(|_| rng::uniform(&mut r, *lo, *hi)).collect()
                }
            };
            let batches: Vec<Vec<usize>> = (0..n)
                .map(|k| perm[(k * iters + it) * cfg.batch..][..cfg.batch].to_vec())
                .collect();
            let ch_seed = rng::derive(cfg.seed, Purpose::Csi, state.iteration);
            loss_sum +=
                train_iteration(net, &mut state.adam, train_set, &batches, &snrs, kind, ch_seed, lr)?;
            state.iteration += 1;
        }
        state.epoch = epoch + 1;
        let fresh = (epoch + 1) % cfg.val_every == 0 || epoch + 1 == cfg.epochs;
        if fresh {
            let report = evaluate(
                net,
                val_set,
                cfg.val_snr_db,
                kind,
                1,
                rng::derive(cfg.seed, Purpose::Eval, epoch as u64),
            )?;
            if !report.avg_psnr_db.is_finite() {
                return Err(Error::NonFinite(format!(
                    "validation PSNR became {} at epoch {}",
                    report.avg_psnr_db, epoch
                )));
            }
            state.last_val_psnr_db = report.avg_psnr_db;
            if report.avg_psnr_db > state.best_val_psnr_db {
                state.best_val_psnr_db = report.avg_psnr_db;
                sink.on_improved(net, report.avg_psnr_db);
            }
        }
        let record = EpochRecord {
            epoch,
            iteration: state.iteration,
            loss: loss_sum / iters as f64,
            val_psnr_db: state.last_val_psnr_db,
            lr,
        };
        let keep_going = sink.on_epoch(&record);
        history.push(record);
        if !keep_going {
            break;
        }
    }
    Ok(history)
}

/// Fresh-state convenience over `run_epochs`.
pub fn train_loop<S: TrainSink>(
    net: &mut DmaNet,
    train_set: &ImageSet,
    val_set: &ImageSet,
    cfg: &TrainConfig,
    sink: &mut S,
) -> Result<(Vec<EpochRecord>, TrainState)> {
    let mut state = TrainState::new(net);
    let history = run_epochs(net, train_set, val_set, cfg, &mut state, sink)?;
    Ok((history, state))
}

/// History CSV header shared by every writer and reader of training logs.
pub const HISTORY_HEADER: &str = "epoch,iteration,loss,val_psnr_db,lr";

/// Formats one history line to match `HISTORY_HEADER`.
pub fn history_line(r: &EpochRecord) -> String {
    format!(
        "{},{},{:.8e},{:.4},{:.8e}",
        r.epoch, r.iteration, r.loss, r.val_psnr_db, r.lr
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SyntheticKind;
    use crate::model::ArchConfig;

    fn tiny_net(n: usize) -> DmaNet {
        let arch = ArchConfig {
            height: 8,
            width: 8,
            in_channels: 3,
            block_channels: vec![4, 4, 4, 4],
            strides: vec![1, 2, 2, 2],
            kernel_size: 3,
            afb_hidden: 0,
            edps: n,
            p_z: 1.0,
        };
        DmaNet::new(arch, 77).unwrap()
    }

    #[test]
    fn lr_schedule_lookup() {
        let cfg = TrainConfig::desk(400, 0);
        assert_eq!(cfg.lr_at(0), 5e-4);
        assert_eq!(cfg.lr_at(99), 5e-4);
        assert_eq!(cfg.lr_at(100), 1e-4);
        assert_eq!(cfg.lr_at(250), 5e-5);
    }

    #[test]
    fn config_validation_catches_bad_schedules() {
        let mut cfg = TrainConfig::desk(10, 0);
        cfg.lr_schedule = vec![(5, 1e-4)];
        assert!(cfg.validate(1).is_err());
        cfg.lr_schedule = vec![(0, 1e-4), (10, 1e-4), (10, 5e-5)];
        assert!(cfg.validate(1).is_err());
        cfg.lr_schedule = vec![(0, 1e-4)];
        cfg.batch = 0;
        assert!(cfg.validate(1).is_err());
        cfg.batch = 4;
        cfg.snr = SnrPolicy::Fixed(vec![10.0]);
        assert!(cfg.validate(2).is_err());
        cfg.snr = SnrPolicy::UniformDb { lo: 5.0, hi: 3.0 };
        assert!(cfg.validate(2).is_err());
        cfg.snr = SnrPolicy::UniformDb { lo: 0.0, hi: 20.0 };
        assert!(cfg.validate(2).is_ok());
    }

    #[test]
    fn snr_policy_midpoints() {
        assert_eq!(SnrPolicy::UniformDb { lo: 0.0, hi: 20.0 }.validation_default(), 10.0);
        assert_eq!(SnrPolicy::Fixed(vec![4.0, 8.0]).validation_default(), 6.0);
    }

    #[test]
    fn train_state_roundtrips_and_rejects_damage() {
        let net = tiny_net(1);
        let mut state = TrainState::new(&net);
        state.epoch = 3;
        state.iteration = 120;
        state.best_val_psnr_db = 27.25;
        state.last_val_psnr_db = 26.5;
        let bytes = state.to_bytes();
        let back = TrainState::from_bytes(&bytes).unwrap();
        assert_eq!(back.epoch, 3);
        assert_eq!(back.iteration, 120);
        assert_eq!(back.best_val_psnr_db, 27.25);
        assert_eq!(back.last_val_psnr_db, 26.5);
        assert_eq!(back.to_bytes(), bytes);

        assert!(TrainState::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(TrainState::from_bytes(&wrong).is_err());
        let mut v2 = bytes;
        v2[4] = 2;
        assert!(TrainState::from_bytes(&v2).is_err());
    }

    #[test]
    fn fresh_state_with_nan_sentinel_roundtrips_bytewise() {
        let net = tiny_net(1);
        let state = TrainState::new(&net);
        let bytes = state.to_bytes();
        let back = TrainState::from_bytes(&bytes).unwrap();
        assert!(back.last_val_psnr_db.is_nan());
        assert_eq!(back.to_bytes(), state.to_bytes());
    }

    #[test]
    fn overlapping_batches_are_rejected() {
        let mut net = tiny_net(2);
        let mut adam = AdamState::new(&net.param_sizes());
        let set = ImageSet::synthetic(8, 8, 8, 0, SyntheticKind::Shapes).unwrap();
        let err = train_iteration(
            &mut net,
            &mut adam,
            &set,
            &[vec![0, 1], vec![1, 2]],
            &[10.0, 10.0],
            ScenarioKind::Awgn,
            5,
            1e-4,
        );
        assert!(matches!(err, Err(Error::Contract(_))));
        // A duplicate inside one batch is the same violation.
        let err = train_iteration(
            &mut net,
            &mut adam,
            &set,
            &[vec![0, 0], vec![1, 2]],
            &[10.0, 10.0],
            ScenarioKind::Awgn,
            5,
            1e-4,
        );
        assert!(matches!(err, Err(Error::Contract(_))));
    }

    #[test]
    fn history_line_format_is_stable() {
        let r = EpochRecord {
            epoch: 2,
            iteration: 30,
            loss: 0.012345678,
            val_psnr_db: 24.5678,
            lr: 5e-4,
        };
        assert_eq!(history_line(&r), "2,30,1.23456780e-2,24.5678,5.00000000e-4");
    }
}

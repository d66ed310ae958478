//! Session orchestration: deterministic input sharing, role drivers, and
//! the run report.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::net::TcpListener;
use std::thread;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use ppod_core::channel::{Channel, ChannelMetrics, Metered};
use ppod_core::circuits::{build_sort_shuffle, SortShuffleSpec};
use ppod_core::knn::WorkCounters;
use ppod_core::oracle::ReplayOracle;
use ppod_core::ot::OtMode;
use ppod_core::protocol::{
    audit_decode_log, Evaluator, Garbler, GatewayConfig, ProtocolConfig, StepReport,
};
use ppod_core::ring::{share, Party, RingShare};
use ppod_core::sim::{loopback_pair, spawn_dealer};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::data;
use crate::dealer;
use crate::tcp::TcpChannel;

/// Expands one master seed into independent per-purpose seeds.
pub fn derive_seed(master: u64, label: &str) -> [u8; 32] {
    let mut h = Sha256::new_with_prefix(b"ppod-seed");
    h.update(master.to_le_bytes());
    h.update(label.as_bytes());
    h.finalize().into()
}

/// The full plaintext input schedule of a run, in the rounded integer
/// domain. Both servers derive the same plan, so the (simulated) gateway
/// needs no live connection.
#[derive(Debug, Clone)]
pub struct StreamPlan {
    pub init: Vec<Vec<u64>>,
    pub slides: Vec<Vec<Vec<u64>>>,
    /// (query point, squared radius) pairs issued after the last slide.
    pub queries: Vec<(Vec<u64>, u64)>,
    pub threshold: u64,
    pub dims: usize,
}

/// Median k-distance over the initial window: a per-dataset threshold that
/// splits typical from isolated points.
pub fn calibrate_threshold(cfg: &ProtocolConfig, init: &[Vec<u64>]) -> u64 {
    let mut kdists: Vec<u64> = init
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut d: Vec<u64> = init
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, q)| ppod_core::oracle::oracle_distance(cfg.ring, p, q))
                .collect();
            d.sort_unstable();
            d[cfg.k - 1]
        })
        .collect();
    kdists.sort_unstable();
    // Slightly above the median so tight-cluster members stay inliers.
    kdists[kdists.len() / 2].saturating_mul(2).max(1)
}

/// Rounds the dataset through the gateway and slices it into the initial
/// window plus full slides; `n_queries` random in-domain queries are
/// appended.
pub fn build_plan(
    cfg: &RunConfig,
    gw: &GatewayConfig,
    rows: &[Vec<f64>],
    master: u64,
    n_queries: usize,
) -> Result<StreamPlan> {
    let proto = cfg.protocol()?;
    if rows.len() < cfg.window {
        bail!("dataset has {} points but the window needs {}", rows.len(), cfg.window);
    }
    let ints: Vec<Vec<u64>> = rows
        .iter()
        .map(|r| gw.preprocess(r).map_err(|e| anyhow::anyhow!("preprocess failed: {e:?}")))
        .collect::<Result<_>>()?;
    let init: Vec<Vec<u64>> = ints[..cfg.window].to_vec();
    let slides: Vec<Vec<Vec<u64>>> = ints[cfg.window..]
        .chunks_exact(cfg.slide)
        .map(|c| c.to_vec())
        .collect();
    let threshold = if cfg.threshold == 0 {
        calibrate_threshold(&proto, &init)
    } else {
        cfg.threshold
    };
    let eps = if cfg.epsilon == 0 { threshold } else { cfg.epsilon };
    let mut qrng = ChaCha20Rng::from_seed(derive_seed(master, "queries"));
    let span = 1u64 << cfg.frac_bits;
    let queries = (0..n_queries)
        .map(|_| {
            let q: Vec<u64> = (0..gw.dims()).map(|_| qrng.gen_range(0..=span)).collect();
            (q, eps)
        })
        .collect();
    Ok(StreamPlan {
        init,
        slides,
        queries,
        threshold,
        dims: gw.dims(),
    })
}

/// One party's halves of every shared input in the plan.
pub struct PartyInputs {
    pub init: Vec<Vec<RingShare>>,
    pub slides: Vec<Vec<Vec<RingShare>>>,
    pub queries: Vec<(Vec<RingShare>, RingShare)>,
    pub thresh: RingShare,
}

/// Splits the whole plan into shares, deterministically from the master
/// seed. Each role computes both halves and keeps its own.
pub fn share_plan(cfg: &ProtocolConfig, plan: &StreamPlan, master: u64) -> (PartyInputs, PartyInputs) {
    let ring = cfg.ring;
    let mut rng = ChaCha20Rng::from_seed(derive_seed(master, "gateway"));
    fn split(
        ring: ppod_core::ring::Ring,
        pts: &[Vec<u64>],
        rng: &mut ChaCha20Rng,
    ) -> (Vec<Vec<RingShare>>, Vec<Vec<RingShare>>) {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for p in pts {
            let mut x = Vec::new();
            let mut y = Vec::new();
            for &c in p {
                let (s0, s1) = share(ring, c & ring.mask(), rng).expect("share in range");
                x.push(s0);
                y.push(s1);
            }
            a.push(x);
            b.push(y);
        }
        (a, b)
    }
    let (i0, i1) = split(ring, &plan.init, &mut rng);
    let mut s0 = Vec::new();
    let mut s1 = Vec::new();
    for s in &plan.slides {
        let (a, b) = split(ring, s, &mut rng);
        s0.push(a);
        s1.push(b);
    }
    let mut q0 = Vec::new();
    let mut q1 = Vec::new();
    for (q, eps) in &plan.queries {
        let (a, b) = split(ring, std::slice::from_ref(q), &mut rng);
        let (e0, e1) = share(ring, *eps & ring.mask(), &mut rng).expect("share in range");
        q0.push((a.into_iter().next().unwrap(), e0));
        q1.push((b.into_iter().next().unwrap(), e1));
    }
    let (t0, t1) = share(ring, plan.threshold & ring.mask(), &mut rng).expect("share in range");
    (
        PartyInputs { init: i0, slides: s0, queries: q0, thresh: t0 },
        PartyInputs { init: i1, slides: s1, queries: q1, thresh: t1 },
    )
}

/// Everything one party observed over a full run.
#[derive(Debug, Clone)]
pub struct PartyOutcome {
    pub party: Party,
    pub init_outliers: Vec<u64>,
    pub steps: Vec<StepReport>,
    pub answers: Vec<bool>,
    pub counters: WorkCounters,
    pub triples: u64,
    pub metrics: ChannelMetrics,
    pub transcript: [u8; 32],
    pub phase_ms: BTreeMap<&'static str, f64>,
    pub leak_ok: bool,
}

enum Driver {
    G(Box<Garbler>),
    E(Box<Evaluator>),
}

/// Drives one party through the whole schedule over any pair of channels.
pub fn run_party<C: Channel, D: Channel>(
    party: Party,
    cfg: ProtocolConfig,
    inputs: PartyInputs,
    seed: [u8; 32],
    ot_mode: OtMode,
    peer: C,
    dealer: D,
) -> Result<PartyOutcome> {
    let mut peer = Metered::new(peer);
    let mut dealer = Metered::new(dealer);
    let err = |e: ppod_core::Error, phase: &str| anyhow::anyhow!("{phase} failed: {e:?}");
    let mut driver = match party {
        Party::P0 => Driver::G(Box::new(
            Garbler::new(cfg, inputs.thresh, seed, ot_mode).map_err(|e| err(e, "setup"))?,
        )),
        Party::P1 => Driver::E(Box::new(
            Evaluator::new(cfg, inputs.thresh, seed, ot_mode).map_err(|e| err(e, "setup"))?,
        )),
    };
    let mut phase_ms: BTreeMap<&'static str, f64> = BTreeMap::new();
    let timed = |name: &'static str, ms: f64, map: &mut BTreeMap<&'static str, f64>| {
        *map.entry(name).or_insert(0.0) += ms;
    };

    let t = Instant::now();
    let init_outliers = match &mut driver {
        Driver::G(g) => g.initialise(inputs.init, &mut peer, &mut dealer),
        Driver::E(e) => e.initialise(inputs.init, &mut peer, &mut dealer),
    }
    .map_err(|e| err(e, "initialise"))?;
    timed("initialise", t.elapsed().as_secs_f64() * 1e3, &mut phase_ms);

    let mut steps = Vec::new();
    for s in inputs.slides {
        let t = Instant::now();
        let step = match &mut driver {
            Driver::G(g) => g.slide(s, &mut peer, &mut dealer),
            Driver::E(e) => e.slide(s, &mut peer, &mut dealer),
        }
        .map_err(|e| err(e, "update"))?;
        timed("update", t.elapsed().as_secs_f64() * 1e3, &mut phase_ms);
        steps.push(step);
    }

    let mut answers = Vec::new();
    for (q, eps) in inputs.queries {
        let t = Instant::now();
        let a = match &mut driver {
            Driver::G(g) => g.query(&q, &eps, &mut peer, &mut dealer),
            Driver::E(e) => e.query(&q, &eps, &mut peer, &mut dealer),
        }
        .map_err(|e| err(e, "query"))?;
        timed("query", t.elapsed().as_secs_f64() * 1e3, &mut phase_ms);
        answers.push(a);
    }

    let (counters, triples, leak_ok) = match &driver {
        Driver::G(g) => (g.counters(), g.triples_consumed(), audit_decode_log(g.decode_log()).is_ok()),
        Driver::E(e) => (e.counters(), e.triples_consumed(), audit_decode_log(e.decode_log()).is_ok()),
    };
    if !peer.metrics().consistent() {
        bail!("channel metrics are inconsistent");
    }
    Ok(PartyOutcome {
        party,
        init_outliers,
        steps,
        answers,
        counters,
        triples,
        metrics: peer.metrics().clone(),
        transcript: peer.transcript_hash(),
        phase_ms,
        leak_ok,
    })
}

/// Replays the plan in plaintext; returns (init outliers, step reports,
/// query answers).
pub fn replay(cfg: &ProtocolConfig, plan: &StreamPlan) -> Result<(Vec<u64>, Vec<StepReport>, Vec<bool>)> {
    let mut oracle = ReplayOracle::new(*cfg, plan.threshold)
        .map_err(|e| anyhow::anyhow!("oracle setup failed: {e:?}"))?;
    let init = oracle
        .initialise(&plan.init)
        .map_err(|e| anyhow::anyhow!("oracle initialise failed: {e:?}"))?;
    let steps = plan
        .slides
        .iter()
        .map(|s| oracle.slide(s).map_err(|e| anyhow::anyhow!("oracle slide failed: {e:?}")))
        .collect::<Result<Vec<_>>>()?;
    let answers = plan.queries.iter().map(|(q, eps)| oracle.query(q, *eps)).collect();
    Ok((init, steps, answers))
}

/// Full report for one run, rendered as stable structured text.
#[derive(Debug)]
pub struct RunReport {
    pub cfg: RunConfig,
    pub dims: usize,
    pub threshold: u64,
    pub preprocess_ms: f64,
    pub outcome: PartyOutcome,
    /// Decode-log audit outcome over every party that ran here.
    pub leak_ok_all: bool,
    /// Both parties reached identical decisions, when both ran here.
    pub parties_agree: Option<bool>,
    /// Hex transcript hashes (party 0, party 1 when present): the same run
    /// over a different transport must reproduce these exactly.
    pub transcript_p0: String,
    pub transcript_p1: Option<String>,
    /// Exact-equivalence verdict against the plaintext replay, when asked.
    pub oracle_verdict: Option<bool>,
}

impl RunReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[parameters]");
        let _ = write!(s, "{}", self.cfg.render());
        let _ = writeln!(s, "dims = {}", self.dims);
        let _ = writeln!(s, "calibrated_threshold = {}", self.threshold);
        let counts = |records: usize, k: usize| {
            build_sort_shuffle(&SortShuffleSpec {
                records,
                k,
                key_bits: self.cfg.bits as usize,
                ids: None,
                reveal_ids: false,
            })
            .map(|c| c.counts().and)
        };
        if let (Ok(init), Ok(upd)) = (counts(self.cfg.window - 1, self.cfg.k), counts(self.cfg.k + 1, self.cfg.k)) {
            let _ = writeln!(s, "knn_circuit_and_gates = {init}");
            let _ = writeln!(s, "update_circuit_and_gates = {upd}");
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "[phases]");
        // Fixed taxonomy order, independent of what actually ran.
        for phase in ["preprocess", "initialise", "query", "update", "knn"] {
            let ms = if phase == "preprocess" {
                self.preprocess_ms
            } else {
                *self.outcome.phase_ms.get(phase).unwrap_or(&0.0)
            };
            let (bytes, rounds) = self
                .outcome
                .metrics
                .per_phase
                .get(phase)
                .copied()
                .unwrap_or((0, 0));
            if phase == "knn" {
                // Sub-phase of initialise/update; its wall time is counted there.
                let _ = writeln!(s, "{phase}: bytes = {bytes}, rounds = {rounds}");
            } else {
                let _ = writeln!(s, "{phase}: wall_ms = {ms:.1}, bytes = {bytes}, rounds = {rounds}");
            }
        }
        let _ = writeln!(s, "total: bytes = {}, rounds = {}", self.outcome.metrics.bytes_sent, self.outcome.metrics.rounds);
        let _ = writeln!(s, "triples_consumed = {}", self.outcome.triples);
        let _ = writeln!(s, "distance_evals = {}", self.outcome.counters.distance_evals);
        let _ = writeln!(s);
        let _ = writeln!(s, "[outliers]");
        let _ = writeln!(s, "init = {:?}", self.outcome.init_outliers);
        for (i, step) in self.outcome.steps.iter().enumerate() {
            let _ = writeln!(s, "slide {i} = {:?}", step.outliers);
        }
        for (i, step) in self.outcome.steps.iter().enumerate() {
            for (id, leak) in &step.knn_leaks {
                let _ = writeln!(s, "slide {i} neighbour-ids of {id} = {leak:?}");
            }
        }
        if !self.outcome.answers.is_empty() {
            let _ = writeln!(s, "queries = {:?}", self.outcome.answers);
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "[verdicts]");
        let _ = writeln!(s, "leakage_audit = {}", verdict_word(self.leak_ok_all));
        if let Some(m) = self.parties_agree {
            let _ = writeln!(s, "parties_agree = {}", verdict_word(m));
        }
        let _ = writeln!(s, "transcript_p0 = {}", self.transcript_p0);
        if let Some(t) = &self.transcript_p1 {
            let _ = writeln!(s, "transcript_p1 = {t}");
        }
        if let Some(v) = self.oracle_verdict {
            let _ = writeln!(s, "oracle_equivalence = {}", verdict_word(v));
        }
        s
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn verdict_word(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn verify(cfg: &ProtocolConfig, plan: &StreamPlan, outcome: &PartyOutcome) -> Result<bool> {
    let (init, steps, answers) = replay(cfg, plan)?;
    Ok(outcome.init_outliers == init && outcome.steps == steps && outcome.answers == answers)
}

pub struct RunOptions {
    pub master: u64,
    pub n_queries: usize,
    pub ot_mode: OtMode,
    pub verify_oracle: bool,
}

fn finish_report(
    cfg: &RunConfig,
    plan: &StreamPlan,
    preprocess_ms: f64,
    p0: PartyOutcome,
    p1: Option<&PartyOutcome>,
    opts: &RunOptions,
) -> Result<RunReport> {
    let proto = cfg.protocol()?;
    let parties_agree = p1.map(|e| {
        e.init_outliers == p0.init_outliers && e.steps == p0.steps && e.answers == p0.answers
    });
    let leak_ok_all = p0.leak_ok && p1.map_or(true, |e| e.leak_ok);
    let transcript_p0 = hex(&p0.transcript);
    let transcript_p1 = p1.map(|e| hex(&e.transcript));
    let oracle_verdict = if opts.verify_oracle {
        Some(verify(&proto, plan, &p0)?)
    } else {
        None
    };
    Ok(RunReport {
        cfg: cfg.clone(),
        dims: plan.dims,
        threshold: plan.threshold,
        preprocess_ms,
        outcome: p0,
        leak_ok_all,
        parties_agree,
        transcript_p0,
        transcript_p1,
        oracle_verdict,
    })
}

/// Runs both parties and the dealer in this process over loopback queues.
pub fn run_inproc(cfg: &RunConfig, rows: &[Vec<f64>], opts: &RunOptions) -> Result<RunReport> {
    let proto = cfg.protocol()?;
    let (lo, hi) = data::bounds(rows);
    let gw = cfg.gateway(lo, hi)?;
    let t = Instant::now();
    let plan = build_plan(cfg, &gw, rows, opts.master, opts.n_queries)?;
    let (in0, in1) = share_plan(&proto, &plan, opts.master);
    let preprocess_ms = t.elapsed().as_secs_f64() * 1e3;

    let (d0, d1, _dealer) = spawn_dealer(derive_seed(opts.master, "dealer"));
    let (c0, c1) = loopback_pair();
    let (s0, s1) = (derive_seed(opts.master, "p0"), derive_seed(opts.master, "p1"));
    let ot = opts.ot_mode;
    let t0 = thread::spawn(move || run_party(Party::P0, proto, in0, s0, ot, c0, d0));
    let t1 = thread::spawn(move || run_party(Party::P1, proto, in1, s1, ot, c1, d1));
    let p0 = t0.join().expect("party 0 panicked")?;
    let p1 = t1.join().expect("party 1 panicked")?;
    finish_report(cfg, &plan, preprocess_ms, p0, Some(&p1), opts)
}

/// Runs a whole session in-process and answers one caller-supplied query
/// against the final window.
pub fn run_single_query(
    cfg: &RunConfig,
    rows: &[Vec<f64>],
    opts: &RunOptions,
    raw_point: &[f64],
    eps: u64,
) -> Result<bool> {
    let proto = cfg.protocol()?;
    let (lo, hi) = data::bounds(rows);
    let gw = cfg.gateway(lo, hi)?;
    let mut plan = build_plan(cfg, &gw, rows, opts.master, 0)?;
    let q = gw
        .preprocess(raw_point)
        .map_err(|e| anyhow::anyhow!("query point rejected: {e:?}"))?;
    plan.queries = vec![(q, eps)];
    let (in0, in1) = share_plan(&proto, &plan, opts.master);
    let (d0, d1, _dealer) = spawn_dealer(derive_seed(opts.master, "dealer"));
    let (c0, c1) = loopback_pair();
    let (s0, s1) = (derive_seed(opts.master, "p0"), derive_seed(opts.master, "p1"));
    let ot = opts.ot_mode;
    let t0 = thread::spawn(move || run_party(Party::P0, proto, in0, s0, ot, c0, d0));
    let t1 = thread::spawn(move || run_party(Party::P1, proto, in1, s1, ot, c1, d1));
    let p0 = t0.join().expect("party 0 panicked")?;
    let p1 = t1.join().expect("party 1 panicked")?;
    if p0.answers != p1.answers {
        bail!("parties disagree on the query verdict");
    }
    Ok(p0.answers[0])
}

/// Runs the deployment-shaped topology — both parties and the dealer talk
/// real TCP on loopback ports — inside this process.
pub fn run_tcp_all(cfg: &RunConfig, rows: &[Vec<f64>], opts: &RunOptions) -> Result<RunReport> {
    let proto = cfg.protocol()?;
    let (lo, hi) = data::bounds(rows);
    let gw = cfg.gateway(lo, hi)?;
    let t = Instant::now();
    let plan = build_plan(cfg, &gw, rows, opts.master, opts.n_queries)?;
    let (in0, in1) = share_plan(&proto, &plan, opts.master);
    let preprocess_ms = t.elapsed().as_secs_f64() * 1e3;

    let peer_listener = TcpListener::bind("127.0.0.1:0").context("bind failed")?;
    let peer_addr = peer_listener.local_addr()?;
    let dealer_listener = TcpListener::bind("127.0.0.1:0").context("bind failed")?;
    let dealer_addr = dealer_listener.local_addr()?;
    drop(dealer_listener);

    let dseed = derive_seed(opts.master, "dealer");
    let td = thread::spawn(move || dealer::serve(dealer_addr, dseed));
    let (s0, s1) = (derive_seed(opts.master, "p0"), derive_seed(opts.master, "p1"));
    let ot = opts.ot_mode;
    let t0 = thread::spawn(move || -> Result<PartyOutcome> {
        let (stream, _) = peer_listener.accept().context("accept failed")?;
        let peer = TcpChannel::new(stream)?;
        let mut dchan = TcpChannel::connect(dealer_addr)?;
        dealer::hello(&mut dchan, Party::P0)?;
        run_party(Party::P0, proto, in0, s0, ot, peer, dchan)
    });
    let t1 = thread::spawn(move || -> Result<PartyOutcome> {
        let peer = TcpChannel::connect(peer_addr)?;
        let mut dchan = TcpChannel::connect(dealer_addr)?;
        dealer::hello(&mut dchan, Party::P1)?;
        run_party(Party::P1, proto, in1, s1, ot, peer, dchan)
    });
    let p0 = t0.join().expect("party 0 panicked")?;
    let p1 = t1.join().expect("party 1 panicked")?;
    td.join().expect("dealer panicked")?;
    finish_report(cfg, &plan, preprocess_ms, p0, Some(&p1), opts)
}

/// Runs a single party of a distributed TCP session.
#[allow(clippy::too_many_arguments)]
pub fn run_tcp_role(
    party: Party,
    cfg: &RunConfig,
    rows: &[Vec<f64>],
    opts: &RunOptions,
    listen: Option<&str>,
    connect: Option<&str>,
    dealer_addr: &str,
) -> Result<RunReport> {
    let proto = cfg.protocol()?;
    let (lo, hi) = data::bounds(rows);
    let gw = cfg.gateway(lo, hi)?;
    let t = Instant::now();
    let plan = build_plan(cfg, &gw, rows, opts.master, opts.n_queries)?;
    let (in0, in1) = share_plan(&proto, &plan, opts.master);
    let preprocess_ms = t.elapsed().as_secs_f64() * 1e3;

    let peer = match party {
        Party::P0 => TcpChannel::listen(listen.context("party 0 needs --listen")?)?,
        Party::P1 => TcpChannel::connect(connect.context("party 1 needs --connect")?)?,
    };
    let mut dchan = TcpChannel::connect(dealer_addr)?;
    dealer::hello(&mut dchan, party)?;
    let inputs = match party {
        Party::P0 => in0,
        Party::P1 => in1,
    };
    let seed = derive_seed(opts.master, if party == Party::P0 { "p0" } else { "p1" });
    let outcome = run_party(party, proto, inputs, seed, opts.ot_mode, peer, dchan)?;
    finish_report(cfg, &plan, preprocess_ms, outcome, None, opts)
}

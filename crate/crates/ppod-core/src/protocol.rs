//! The sliding-window outlier-detection protocol: gateway preprocessing,
//! window initialisation, per-slide updates, and outlier queries, driven
//! symmetrically by the two server parties.

use alloc::vec::Vec;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_core::RngCore;

use crate::channel::{Channel, Metered, Phase};
use crate::circuit::to_bits;
use crate::circuits::{build_query, SENTINEL_ID};
use crate::error::{Error, Result};
use crate::knn::{
    compare_threshold_evaluator, compare_threshold_garbler, derandomise_evaluator,
    derandomise_garbler, distance_batch, kdist_evaluator, kdist_garbler, knn_evaluator,
    knn_garbler, randomise_evaluator, randomise_garbler, RandomisedListE, RandomisedListG,
    WorkCounters,
};
use crate::ot::OtMode;
use crate::ring::{share, Party, Ring, RingShare, TriplePool};
use crate::yao::{words_to_bits, DecodeEvent, EvaluatorSession, GarblerSession, RunSpec};

/// Public protocol parameters; identical on both servers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProtocolConfig {
    pub ring: Ring,
    /// Neighbour count k.
    pub k: usize,
    /// Window size W.
    pub window: usize,
    /// Slide size S.
    pub slide: usize,
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::Parameter("window must hold at least 2 points".into()));
        }
        if self.slide == 0 || self.slide >= self.window {
            return Err(Error::Parameter("need 1 <= slide < window".into()));
        }
        if self.k == 0 || self.k + self.slide > self.window {
            return Err(Error::Parameter("need 1 <= k <= window - slide".into()));
        }
        if self.window as u64 >= SENTINEL_ID {
            return Err(Error::Parameter("window too large for id width".into()));
        }
        Ok(())
    }
}

/// Gateway-side preparation of raw points for the ring.
#[derive(Debug, Clone)]
pub struct GatewayConfig {
    pub ring: Ring,
    /// Fractional bits l_D of the fixed-point encoding.
    pub frac_bits: u32,
    /// Per-dimension normalisation bounds.
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// Clamp out-of-bound coordinates instead of rejecting them.
    pub clamp: bool,
}

impl GatewayConfig {
    pub fn dims(&self) -> usize {
        self.min.len()
    }

    /// Squared distances must not wrap: n * 2^(2*l_D + 2) < 2^l.
    pub fn wrap_check(&self) -> Result<()> {
        if self.min.len() != self.max.len() || self.min.is_empty() {
            return Err(Error::Parameter("normalisation bounds malformed".into()));
        }
        for (lo, hi) in self.min.iter().zip(self.max.iter()) {
            if !(hi > lo) {
                return Err(Error::Parameter("normalisation bounds must satisfy min < max".into()));
            }
        }
        let need = (self.dims() as u128) << (2 * self.frac_bits + 2);
        if need >= 1u128 << self.ring.bits() {
            return Err(Error::Parameter(
                "ring too small for squared distances at this precision".into(),
            ));
        }
        Ok(())
    }

    /// Normalises each coordinate to [0, 1] and rounds down to l_D
    /// fractional bits.
    pub fn preprocess(&self, point: &[f64]) -> Result<Vec<u64>> {
        if point.len() != self.dims() {
            return Err(Error::DimensionMismatch);
        }
        let scale = (1u64 << self.frac_bits) as f64;
        point
            .iter()
            .zip(self.min.iter().zip(self.max.iter()))
            .map(|(&x, (&lo, &hi))| {
                if !x.is_finite() {
                    return Err(Error::Parameter("non-finite coordinate".into()));
                }
                let mut t = (x - lo) / (hi - lo);
                if !(0.0..=1.0).contains(&t) {
                    if self.clamp {
                        t = t.clamp(0.0, 1.0);
                    } else {
                        return Err(Error::OutOfRange);
                    }
                }
                Ok((t * scale) as u64)
            })
            .collect()
    }

    /// Splits a preprocessed point into the two servers' shares.
    pub fn share_point(
        &self,
        ints: &[u64],
        rng: &mut impl RngCore,
    ) -> Result<(Vec<RingShare>, Vec<RingShare>)> {
        let mut p0 = Vec::with_capacity(ints.len());
        let mut p1 = Vec::with_capacity(ints.len());
        for &v in ints {
            let (a, b) = share(self.ring, v, rng)?;
            p0.push(a);
            p1.push(b);
        }
        Ok((p0, p1))
    }
}

/// Squared fixed-point threshold for a radius given in normalised units.
pub fn scale_threshold(radius: f64, frac_bits: u32) -> u64 {
    let s = radius * (1u64 << frac_bits) as f64;
    (s * s) as u64
}

/// What one slide revealed and decided.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StepReport {
    pub expired: Vec<u64>,
    pub new_ids: Vec<u64>,
    /// Per new point: its revealed neighbour ids, sorted.
    pub knn_leaks: Vec<(u64, Vec<u64>)>,
    /// Full outlier id set after the slide, sorted.
    pub outliers: Vec<u64>,
}

struct EntryG {
    id: u64,
    coords: Vec<RingShare>,
    list: RandomisedListG,
    outlier: bool,
}

struct EntryE {
    id: u64,
    coords: Vec<RingShare>,
    list: RandomisedListE,
    outlier: bool,
}

const SLOT_KNN: &str = "knn";
const SLOT_KDIST: &str = "kdist";
const SLOT_UPD: &str = "upd";

fn sorted_ids(mut v: Vec<u64>) -> Vec<u64> {
    v.sort_unstable();
    v
}

macro_rules! party_impl {
    ($name:ident, $entry:ty, $party:expr) => {
        impl $name {
            pub fn config(&self) -> &ProtocolConfig {
                &self.cfg
            }

            pub fn counters(&self) -> WorkCounters {
                self.counters
            }

            pub fn triples_consumed(&self) -> u64 {
                self.pool.consumed()
            }

            /// Current outlier id set, sorted. Public information.
            pub fn outlier_ids(&self) -> Vec<u64> {
                sorted_ids(
                    self.entries
                        .iter()
                        .filter(|e| e.outlier)
                        .map(|e| e.id)
                        .collect(),
                )
            }

            pub fn window_ids(&self) -> Vec<u64> {
                self.entries.iter().map(|e| e.id).collect()
            }

            fn entry_index(&self, id: u64) -> Result<usize> {
                self.entries
                    .iter()
                    .position(|e| e.id == id)
                    .ok_or_else(|| Error::Protocol(alloc::format!("unknown neighbour id {id}")))
            }
        }
    };
}

/// Party 0: garbler in every circuit phase.
pub struct Garbler {
    cfg: ProtocolConfig,
    sess: GarblerSession<ChaCha20Rng>,
    rng: ChaCha20Rng,
    pool: TriplePool,
    thresh: RingShare,
    entries: Vec<EntryG>,
    counters: WorkCounters,
    next_id: u64,
}

/// Party 1: evaluator in every circuit phase.
pub struct Evaluator {
    cfg: ProtocolConfig,
    sess: EvaluatorSession,
    rng: ChaCha20Rng,
    pool: TriplePool,
    thresh: RingShare,
    entries: Vec<EntryE>,
    counters: WorkCounters,
    next_id: u64,
}

party_impl!(Garbler, EntryG, Party::P0);
party_impl!(Evaluator, EntryE, Party::P1);

impl Garbler {
    pub fn new(cfg: ProtocolConfig, thresh: RingShare, seed: [u8; 32], ot_mode: OtMode) -> Result<Garbler> {
        cfg.validate()?;
        if thresh.party != Party::P0 || thresh.bits != cfg.ring.bits() {
            return Err(Error::PartyMismatch);
        }
        let mut root = ChaCha20Rng::from_seed(seed);
        let mut s0 = [0u8; 32];
        let mut s1 = [0u8; 32];
        root.fill_bytes(&mut s0);
        root.fill_bytes(&mut s1);
        Ok(Garbler {
            cfg,
            sess: GarblerSession::new(ChaCha20Rng::from_seed(s0), ot_mode),
            rng: ChaCha20Rng::from_seed(s1),
            pool: TriplePool::dealer_backed(cfg.ring, Party::P0),
            thresh,
            entries: Vec::new(),
            counters: WorkCounters::default(),
            next_id: 0,
        })
    }

    pub fn decode_log(&self) -> &[DecodeEvent] {
        self.sess.decode_log()
    }

    /// Computes one point's list against the coordinate set in `others`,
    /// stores it randomised, and returns the outlier flag (plus revealed
    /// neighbour ids when `ids` is given).
    fn point_round<C: Channel, D: Channel>(
        &mut self,
        coords: &[Vec<RingShare>],
        q: &[RingShare],
        ids: Option<&[u64]>,
        peer: &mut Metered<C>,
        dealer: &mut Metered<D>,
    ) -> Result<(bool, RandomisedListG, Option<Vec<u64>>)> {
        let ring = self.cfg.ring;
        let k = self.cfg.k;
        let outer = peer.phase();
        peer.set_phase(Phase::Knn);
        dealer.set_phase(Phase::Knn);
        let dists = distance_batch(ring, coords, q, &mut self.pool, peer, dealer, &mut self.counters)?;
        let revealed = knn_garbler(&mut self.sess, ring, &dists, k, SLOT_KNN, ids, peer, dealer)?;
        peer.set_phase(outer);
        dealer.set_phase(outer);
        kdist_garbler(&mut self.sess, ring, k, SLOT_KNN, SLOT_KDIST, peer, dealer)?;
        let outlier =
            compare_threshold_garbler(&mut self.sess, SLOT_KDIST, &self.thresh, peer, dealer)?;
        self.sess.drop_slot(SLOT_KDIST);
        let list = randomise_garbler(&mut self.sess, &mut self.rng, ring, k, SLOT_KNN, peer, dealer)?;
        Ok((outlier, list, revealed))
    }

    /// Fills the first window and fixes every point's initial outlier flag.
    pub fn initialise<C: Channel, D: Channel>(
        &mut self,
        points: Vec<Vec<RingShare>>,
        peer: &mut Metered<C>,
        dealer: &mut Metered<D>,
    ) -> Result<Vec<u64>> {
        if points.len() != self.cfg.window {
            return Err(Error::Parameter("initialise needs exactly one window of points".into()));
        }
        if !self.entries.is_empty() {
            return Err(Error::Protocol("window already initialised".into()));
        }
        peer.set_phase(Phase::Initialise);
        dealer.set_phase(Phase::Initialise);
        for i in 0..points.len() {
            let others: Vec<Vec<RingShare>> = points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, p)| p.clone())
                .collect();
            let (outlier, list, _) = self.point_round(&others, &points[i], None, peer, dealer)?;
            self.entries.push(EntryG {
                id: self.next_id,
                coords: points[i].clone(),
                list,
                outlier,
            });
            self.next_id += 1;
        }
        Ok(self.outlier_ids())
    }

    /// One window slide: expire the oldest S points, admit S new ones, and
    /// refresh every revealed neighbour's list and flag.
    pub fn slide<C: Channel, D: Channel>(
        &mut self,
        points: Vec<Vec<RingShare>>,
        peer: &mut Metered<C>,
        dealer: &mut Metered<D>,
    ) -> Result<StepReport> {
        if points.len() != self.cfg.slide {
            return Err(Error::Parameter("slide needs exactly S points".into()));
        }
        if self.entries.len() != self.cfg.window {
            return Err(Error::Protocol("window not initialised".into()));
        }
        peer.set_phase(Phase::Update);
        dealer.set_phase(Phase::Update);
        let ring = self.cfg.ring;
        let k = self.cfg.k;
        let mut report = StepReport {
            expired: self.entries.drain(..self.cfg.slide).map(|e| e.id).collect(),
            ..StepReport::default()
        };
        for q in points {
            let qid = self.next_id;
            self.next_id += 1;
            let coords: Vec<Vec<RingShare>> = self.entries.iter().map(|e| e.coords.clone()).collect();
            let ids: Vec<u64> = self.entries.iter().map(|e| e.id).collect();
            let (outlier, list, revealed) =
                self.point_round(&coords, &q, Some(&ids), peer, dealer)?;
            let revealed = revealed.expect("ids were requested");
            self.entries.push(EntryG {
                id: qid,
                coords: q.clone(),
                list,
                outlier,
            });
            for &j in &revealed {
                let idx = self.entry_index(j)?;
                let pairing =
                    derandomise_garbler(&mut self.sess, &self.entries[idx].list, peer, dealer)?;
                let _ = pairing; // alignment is the evaluator's side of the pairing
                let d = distance_batch(
                    ring,
                    core::slice::from_ref(&self.entries[idx].coords),
                    &q,
                    &mut self.pool,
                    peer,
                    dealer,
                    &mut self.counters,
                )?;
                let mut keys = self.entries[idx].list.shares(ring);
                keys.push(d[0]);
                knn_garbler(&mut self.sess, ring, &keys, k, SLOT_UPD, None, peer, dealer)?;
                kdist_garbler(&mut self.sess, ring, k, SLOT_UPD, SLOT_KDIST, peer, dealer)?;
                let flag = compare_threshold_garbler(
                    &mut self.sess,
                    SLOT_KDIST,
                    &self.thresh,
                    peer,
                    dealer,
                )?;
                self.sess.drop_slot(SLOT_KDIST);
                let list =
                    randomise_garbler(&mut self.sess, &mut self.rng, ring, k, SLOT_UPD, peer, dealer)?;
                let e = &mut self.entries[idx];
                e.list = list;
                e.outlier = flag;
            }
            report.new_ids.push(qid);
            report.knn_leaks.push((qid, sorted_ids(revealed)));
        }
        report.outliers = self.outlier_ids();
        Ok(report)
    }

    /// Answers whether any current outlier lies within `eps` (squared,
    /// shared) of the query point. Only the single boolean is revealed.
    pub fn query<C: Channel, D: Channel>(
        &mut self,
        q: &[RingShare],
        eps: &RingShare,
        peer: &mut Metered<C>,
        dealer: &mut Metered<D>,
    ) -> Result<bool> {
        peer.set_phase(Phase::Query);
        dealer.set_phase(Phase::Query);
        let outliers: Vec<Vec<RingShare>> = self
            .entries
            .iter()
            .filter(|e| e.outlier)
            .map(|e| e.coords.clone())
            .collect();
        if outliers.is_empty() {
            return Ok(false);
        }
        let dists = distance_batch(
            self.cfg.ring,
            &outliers,
            q,
            &mut self.pool,
            peer,
            dealer,
            &mut self.counters,
        )?;
        let width = self.cfg.ring.bits() as usize;
        let circuit = build_query(outliers.len(), width)?;
        let mut inputs = alloc::collections::BTreeMap::new();
        let values: Vec<u64> = dists.iter().map(|s| s.value).collect();
        inputs.insert("dist_g", words_to_bits(&values, width));
        inputs.insert("eps_g", to_bits(eps.value, width));
        let out = self.sess.run(&circuit, &RunSpec::new(), &inputs, peer, dealer)?;
        Ok(out["assert"][0])
    }
}

impl Evaluator {
    pub fn new(cfg: ProtocolConfig, thresh: RingShare, seed: [u8; 32], ot_mode: OtMode) -> Result<Evaluator> {
        cfg.validate()?;
        if thresh.party != Party::P1 || thresh.bits != cfg.ring.bits() {
            return Err(Error::PartyMismatch);
        }
        Ok(Evaluator {
            cfg,
            sess: EvaluatorSession::new(ot_mode),
            rng: ChaCha20Rng::from_seed(seed),
            pool: TriplePool::dealer_backed(cfg.ring, Party::P1),
            thresh,
            entries: Vec::new(),
            counters: WorkCounters::default(),
            next_id: 0,
        })
    }

    pub fn decode_log(&self) -> &[DecodeEvent] {
        self.sess.decode_log()
    }

    fn point_round<C: Channel, D: Channel>(
        &mut self,
        coords: &[Vec<RingShare>],
        q: &[RingShare],
        ids: Option<&[u64]>,
        peer: &mut Metered<C>,
        dealer: &mut Metered<D>,
    ) -> Result<(bool, RandomisedListE, Option<Vec<u64>>)> {
        let ring = self.cfg.ring;
        let k = self.cfg.k;
        let outer = peer.phase();
        peer.set_phase(Phase::Knn);
        dealer.set_phase(Phase::Knn);
        let dists = distance_batch(ring, coords, q, &mut self.pool, peer, dealer, &mut self.counters)?;
        let revealed = knn_evaluator(
            &mut self.sess,
            &mut self.rng,
            ring,
            &dists,
            k,
            SLOT_KNN,
            ids,
            peer,
            dealer,
        )?;
        peer.set_phase(outer);
        dealer.set_phase(outer);
        kdist_evaluator(&mut self.sess, ring, k, SLOT_KNN, SLOT_KDIST, peer, dealer)?;
        let outlier =
            compare_threshold_evaluator(&mut self.sess, SLOT_KDIST, &self.thresh, peer, dealer)?;
        self.sess.drop_slot(SLOT_KDIST);
        let list =
            randomise_evaluator(&mut self.sess, &mut self.rng, ring, k, SLOT_KNN, peer, dealer)?;
        Ok((outlier, list, revealed))
    }

    pub fn initialise<C: Channel, D: Channel>(
        &mut self,
        points: Vec<Vec<RingShare>>,
        peer: &mut Metered<C>,
        dealer: &mut Metered<D>,
    ) -> Result<Vec<u64>> {
        if points.len() != self.cfg.window {
            return Err(Error::Parameter("initialise needs exactly one window of points".into()));
        }
        if !self.entries.is_empty() {
            return Err(Error::Protocol("window already initialised".into()));
        }
        peer.set_phase(Phase::Initialise);
        dealer.set_phase(Phase::Initialise);
        for i in 0..points.len() {
            let others: Vec<Vec<RingShare>> = points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, p)| p.clone())
                .collect();
            let (outlier, list, _) = self.point_round(&others, &points[i], None, peer, dealer)?;
            self.entries.push(EntryE {
                id: self.next_id,
                coords: points[i].clone(),
                list,
                outlier,
            });
            self.next_id += 1;
        }
        Ok(self.outlier_ids())
    }

    pub fn slide<C: Channel, D: Channel>(
        &mut self,
        points: Vec<Vec<RingShare>>,
        peer: &mut Metered<C>,
        dealer: &mut Metered<D>,
    ) -> Result<StepReport> {
        if points.len() != self.cfg.slide {
            return Err(Error::Parameter("slide needs exactly S points".into()));
        }
        if self.entries.len() != self.cfg.window {
            return Err(Error::Protocol("window not initialised".into()));
        }
        peer.set_phase(Phase::Update);
        dealer.set_phase(Phase::Update);
        let ring = self.cfg.ring;
        let k = self.cfg.k;
        let mut report = StepReport {
            expired: self.entries.drain(..self.cfg.slide).map(|e| e.id).collect(),
            ..StepReport::default()
        };
        for q in points {
            let qid = self.next_id;
            self.next_id += 1;
            let coords: Vec<Vec<RingShare>> = self.entries.iter().map(|e| e.coords.clone()).collect();
            let ids: Vec<u64> = self.entries.iter().map(|e| e.id).collect();
            let (outlier, list, revealed) =
                self.point_round(&coords, &q, Some(&ids), peer, dealer)?;
            let revealed = revealed.expect("ids were requested");
            self.entries.push(EntryE {
                id: qid,
                coords: q.clone(),
                list,
                outlier,
            });
            for &j in &revealed {
                let idx = self.entry_index(j)?;
                let pairing =
                    derandomise_evaluator(&mut self.sess, &self.entries[idx].list, peer, dealer)?;
                let d = distance_batch(
                    ring,
                    core::slice::from_ref(&self.entries[idx].coords),
                    &q,
                    &mut self.pool,
                    peer,
                    dealer,
                    &mut self.counters,
                )?;
                let mut keys = self.entries[idx].list.aligned_shares(&pairing, ring);
                keys.push(d[0]);
                knn_evaluator(
                    &mut self.sess,
                    &mut self.rng,
                    ring,
                    &keys,
                    k,
                    SLOT_UPD,
                    None,
                    peer,
                    dealer,
                )?;
                kdist_evaluator(&mut self.sess, ring, k, SLOT_UPD, SLOT_KDIST, peer, dealer)?;
                let flag = compare_threshold_evaluator(
                    &mut self.sess,
                    SLOT_KDIST,
                    &self.thresh,
                    peer,
                    dealer,
                )?;
                self.sess.drop_slot(SLOT_KDIST);
                let list = randomise_evaluator(
                    &mut self.sess,
                    &mut self.rng,
                    ring,
                    k,
                    SLOT_UPD,
                    peer,
                    dealer,
                )?;
                let e = &mut self.entries[idx];
                e.list = list;
                e.outlier = flag;
            }
            report.new_ids.push(qid);
            report.knn_leaks.push((qid, sorted_ids(revealed)));
        }
        report.outliers = self.outlier_ids();
        Ok(report)
    }

    pub fn query<C: Channel, D: Channel>(
        &mut self,
        q: &[RingShare],
        eps: &RingShare,
        peer: &mut Metered<C>,
        dealer: &mut Metered<D>,
    ) -> Result<bool> {
        peer.set_phase(Phase::Query);
        dealer.set_phase(Phase::Query);
        let outliers: Vec<Vec<RingShare>> = self
            .entries
            .iter()
            .filter(|e| e.outlier)
            .map(|e| e.coords.clone())
            .collect();
        if outliers.is_empty() {
            return Ok(false);
        }
        let dists = distance_batch(
            self.cfg.ring,
            &outliers,
            q,
            &mut self.pool,
            peer,
            dealer,
            &mut self.counters,
        )?;
        let width = self.cfg.ring.bits() as usize;
        let circuit = build_query(outliers.len(), width)?;
        let mut inputs = alloc::collections::BTreeMap::new();
        let values: Vec<u64> = dists.iter().map(|s| s.value).collect();
        inputs.insert("dist_e", words_to_bits(&values, width));
        inputs.insert("eps_e", to_bits(eps.value, width));
        let out = self.sess.run(&circuit, &RunSpec::new(), &inputs, peer, dealer)?;
        Ok(out["assert"][0])
    }
}

/// Classes a decode log may contain in a protocol run; anything else is a
/// leak the design does not admit.
pub fn audit_decode_log(log: &[DecodeEvent]) -> Result<()> {
    use crate::circuit::LeakClass;
    for e in log {
        match e.leak {
            LeakClass::OutlierFlag
            | LeakClass::QueryAssertion
            | LeakClass::KnnIds
            | LeakClass::PairingBits
            | LeakClass::Masked => {}
            LeakClass::Diagnostic => {
                return Err(Error::Protocol(alloc::format!(
                    "diagnostic bundle {} decoded in protocol run",
                    e.bundle
                )))
            }
        }
    }
    Ok(())
}

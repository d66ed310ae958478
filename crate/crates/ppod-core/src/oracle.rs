//! Plaintext reference implementations used to pin down expected results.
//!
//! [`ReplayOracle`] mirrors the deployed pipeline decision-for-decision:
//! fixed-point ring arithmetic, the sorting network's tie behaviour for
//! revealed neighbour ids, stored per-point neighbour lists that are only
//! refreshed when an arrival reveals the point as a neighbour, and strict
//! threshold comparisons. A run over shares must match it bit for bit.
//!
//! [`textbook_outliers`] is the from-scratch definition (every flag
//! recomputed from the current window), deliberately ignorant of the stored
//! list mechanics; tests use it to characterise where the incremental
//! pipeline's staleness shows.

use alloc::vec::Vec;

use crate::circuits::plain_sort_shuffle_select;
use crate::error::{Error, Result};
use crate::protocol::{ProtocolConfig, StepReport};
use crate::ring::Ring;

/// Squared Euclidean distance in the ring, matching the shared computation
/// exactly (including any wraparound).
pub fn oracle_distance(ring: Ring, p: &[u64], q: &[u64]) -> u64 {
    p.iter()
        .zip(q.iter())
        .map(|(&a, &b)| {
            let d = ring.sub(a, b);
            ring.mul(d, d)
        })
        .fold(0, |acc, s| ring.add(acc, s))
}

struct OracleEntry {
    id: u64,
    coords: Vec<u64>,
    /// k nearest distances, ascending.
    list: Vec<u64>,
    outlier: bool,
}

/// Protocol-faithful plaintext replay.
pub struct ReplayOracle {
    cfg: ProtocolConfig,
    thresh: u64,
    entries: Vec<OracleEntry>,
    next_id: u64,
}

impl ReplayOracle {
    pub fn new(cfg: ProtocolConfig, thresh: u64) -> Result<ReplayOracle> {
        cfg.validate()?;
        Ok(ReplayOracle {
            cfg,
            thresh,
            entries: Vec::new(),
            next_id: 0,
        })
    }

    pub fn outlier_ids(&self) -> Vec<u64> {
        let mut v: Vec<u64> = self
            .entries
            .iter()
            .filter(|e| e.outlier)
            .map(|e| e.id)
            .collect();
        v.sort_unstable();
        v
    }

    pub fn window_ids(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.id).collect()
    }

    fn knn_values(&self, dists: &[u64]) -> Vec<u64> {
        let k = self.cfg.k;
        let ident: Vec<usize> = (0..k).collect();
        let mut v: Vec<u64> =
            plain_sort_shuffle_select(dists, None, k, self.cfg.ring.bits() as usize, &ident)
                .into_iter()
                .map(|(key, _)| key)
                .collect();
        v.sort_unstable();
        v
    }

    /// Neighbour ids as the sorting network reveals them (set, sorted).
    fn knn_ids(&self, dists: &[u64], ids: &[u64]) -> Vec<u64> {
        let k = self.cfg.k;
        let ident: Vec<usize> = (0..k).collect();
        let mut v: Vec<u64> = plain_sort_shuffle_select(
            dists,
            Some(ids),
            k,
            self.cfg.ring.bits() as usize,
            &ident,
        )
        .into_iter()
        .map(|(_, id)| id)
        .collect();
        v.sort_unstable();
        v
    }

    pub fn initialise(&mut self, points: &[Vec<u64>]) -> Result<Vec<u64>> {
        if points.len() != self.cfg.window {
            return Err(Error::Parameter("initialise needs exactly one window of points".into()));
        }
        let ring = self.cfg.ring;
        for (i, p) in points.iter().enumerate() {
            let dists: Vec<u64> = points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, o)| oracle_distance(ring, o, p))
                .collect();
            let list = self.knn_values(&dists);
            let outlier = *list.last().unwrap() > self.thresh;
            self.entries.push(OracleEntry {
                id: self.next_id,
                coords: p.clone(),
                list,
                outlier,
            });
            self.next_id += 1;
        }
        Ok(self.outlier_ids())
    }

    pub fn slide(&mut self, points: &[Vec<u64>]) -> Result<StepReport> {
        if points.len() != self.cfg.slide {
            return Err(Error::Parameter("slide needs exactly S points".into()));
        }
        let ring = self.cfg.ring;
        let mut report = StepReport {
            expired: self.entries.drain(..self.cfg.slide).map(|e| e.id).collect(),
            ..StepReport::default()
        };
        for q in points {
            let qid = self.next_id;
            self.next_id += 1;
            let dists: Vec<u64> = self
                .entries
                .iter()
                .map(|e| oracle_distance(ring, &e.coords, q))
                .collect();
            let ids: Vec<u64> = self.entries.iter().map(|e| e.id).collect();
            let revealed = self.knn_ids(&dists, &ids);
            let list = self.knn_values(&dists);
            let outlier = *list.last().unwrap() > self.thresh;
            self.entries.push(OracleEntry {
                id: qid,
                coords: q.clone(),
                list,
                outlier,
            });
            for &j in &revealed {
                let idx = self
                    .entries
                    .iter()
                    .position(|e| e.id == j)
                    .expect("revealed id in window");
                let d = oracle_distance(ring, &self.entries[idx].coords, q);
                let e = &mut self.entries[idx];
                e.list.push(d);
                e.list.sort_unstable();
                e.list.pop();
                e.outlier = *e.list.last().unwrap() > self.thresh;
            }
            report.new_ids.push(qid);
            report.knn_leaks.push((qid, revealed));
        }
        report.outliers = self.outlier_ids();
        Ok(report)
    }

    pub fn query(&self, q: &[u64], eps: u64) -> bool {
        self.entries
            .iter()
            .filter(|e| e.outlier)
            .any(|e| oracle_distance(self.cfg.ring, &e.coords, q) <= eps)
    }
}

/// From-scratch outlier set over a full window: a point is an outlier iff
/// its distance to its k-th nearest window neighbour strictly exceeds the
/// threshold. No stored lists, no staleness.
pub fn textbook_outliers(
    ring: Ring,
    points: &[(u64, Vec<u64>)],
    k: usize,
    thresh: u64,
) -> Vec<u64> {
    let mut out = Vec::new();
    for (id, p) in points {
        let mut dists: Vec<u64> = points
            .iter()
            .filter(|(oid, _)| oid != id)
            .map(|(_, o)| oracle_distance(ring, o, p))
            .collect();
        dists.sort_unstable();
        if dists[k - 1] > thresh {
            out.push(*id);
        }
    }
    out.sort_unstable();
    out
}

//! Named circuit builders: arithmetic blocks, the MAX chain, the
//! Randomise/Derandomise pair, conversions and the query assertion.

use alloc::vec::Vec;

use crate::circuit::{Circuit, Destination, InputOwner, LeakClass};
use crate::error::{Error, Result};

use super::builder::Builder;
use super::FLAG_BITS;

/// `sum = a + b mod 2^w`; diagnostic circuit, also the A2Y core.
pub fn build_adder(width: usize) -> Result<Circuit> {
    Builder::width_check(width)?;
    let mut b = Builder::new();
    let a = b.input("a", InputOwner::Garbler, width);
    let bb = b.input("b", InputOwner::Evaluator, width);
    let sum = b.adder(&a, &bb);
    b.output("sum", Destination::Both, LeakClass::Diagnostic, sum);
    b.finish()
}

pub fn build_subtractor(width: usize) -> Result<Circuit> {
    Builder::width_check(width)?;
    let mut b = Builder::new();
    let a = b.input("a", InputOwner::Garbler, width);
    let bb = b.input("b", InputOwner::Evaluator, width);
    let diff = b.subtractor(&a, &bb);
    b.output("diff", Destination::Both, LeakClass::Diagnostic, diff);
    b.finish()
}

/// One bit: a > b (unsigned, strict).
pub fn build_comparator(width: usize) -> Result<Circuit> {
    Builder::width_check(width)?;
    let mut b = Builder::new();
    let a = b.input("a", InputOwner::Garbler, width);
    let bb = b.input("b", InputOwner::Evaluator, width);
    let gt = b.gt(&a, &bb);
    b.output("gt", Destination::Both, LeakClass::Diagnostic, alloc::vec![gt]);
    b.finish()
}

pub fn build_or_reduce(count: usize) -> Result<Circuit> {
    if count == 0 {
        return Err(Error::Parameter("or_reduce needs at least one input".into()));
    }
    let mut b = Builder::new();
    let bits = b.input("bits", InputOwner::Garbler, count);
    let out = b.or_reduce(&bits);
    b.output("or", Destination::Both, LeakClass::Diagnostic, alloc::vec![out]);
    b.finish()
}

/// MAX chain over k carried Yao-shared words; output stays in Yao form.
pub fn build_max(k: usize, width: usize) -> Result<Circuit> {
    if k == 0 {
        return Err(Error::Parameter("max needs at least one input".into()));
    }
    Builder::width_check(width)?;
    let mut b = Builder::new();
    let list = b.input("list", InputOwner::Carried, k * width);
    let words: Vec<Vec<_>> = (0..k).map(|i| list[i * width..(i + 1) * width].to_vec()).collect();
    let max = b.max(&words);
    b.output("max", Destination::Reshare, LeakClass::Masked, max);
    b.finish()
}

/// A2Y: reconstructs a value inside the circuit from the two parties'
/// additive shares; output stays in Yao form.
pub fn build_a2y(width: usize) -> Result<Circuit> {
    Builder::width_check(width)?;
    let mut b = Builder::new();
    let a0 = b.input("share_g", InputOwner::Garbler, width);
    let a1 = b.input("share_e", InputOwner::Evaluator, width);
    let sum = b.adder(&a0, &a1);
    b.output("value", Destination::Reshare, LeakClass::Masked, sum);
    b.finish()
}

/// Y2A: subtracts the garbler's fresh mask from a carried value; the
/// evaluator decodes only the masked difference, which becomes its share.
pub fn build_y2a(width: usize) -> Result<Circuit> {
    Builder::width_check(width)?;
    let mut b = Builder::new();
    let value = b.input("value", InputOwner::Carried, width);
    let mask = b.input("mask", InputOwner::Garbler, width);
    let diff = b.subtractor(&value, &mask);
    b.output("share", Destination::Evaluator, LeakClass::Masked, diff);
    b.finish()
}

/// Compares a carried value against a threshold reconstructed from both
/// parties' additive shares; the strict `value > threshold` bit is decoded to
/// both (the outlier decision).
pub fn build_compare_threshold(width: usize) -> Result<Circuit> {
    Builder::width_check(width)?;
    let mut b = Builder::new();
    let value = b.input("value", InputOwner::Carried, width);
    let t0 = b.input("thresh_g", InputOwner::Garbler, width);
    let t1 = b.input("thresh_e", InputOwner::Evaluator, width);
    let thresh = b.adder(&t0, &t1);
    let gt = b.gt(&value, &thresh);
    b.output("gt", Destination::Both, LeakClass::OutlierFlag, alloc::vec![gt]);
    b.finish()
}

/// Randomise: per entry, re-shares the carried distance under a fresh garbler
/// mask and tags the evaluator with `flag = m xor R^m`. Subtract and XOR
/// only; the masks never leave the garbler, the evaluator decodes only
/// uniformly masked words.
pub fn build_randomise(k: usize, width: usize) -> Result<Circuit> {
    if k == 0 {
        return Err(Error::Parameter("randomise needs at least one entry".into()));
    }
    Builder::width_check(width)?;
    let mut b = Builder::new();
    let dists = b.input("dists", InputOwner::Carried, k * width);
    let masks = b.input("masks", InputOwner::Garbler, k * width);
    let rm = b.input("rm", InputOwner::Garbler, k * FLAG_BITS);
    let magic = b.input("magic", InputOwner::Evaluator, FLAG_BITS);
    let mut shares = Vec::with_capacity(k * width);
    let mut flags = Vec::with_capacity(k * FLAG_BITS);
    for j in 0..k {
        let d = &dists[j * width..(j + 1) * width];
        let r = &masks[j * width..(j + 1) * width];
        shares.extend(b.subtractor(d, r));
        for i in 0..FLAG_BITS {
            flags.push(b.xor(rm[j * FLAG_BITS + i], magic[i]));
        }
    }
    b.output("shares", Destination::Evaluator, LeakClass::Masked, shares);
    b.output("flags", Destination::Evaluator, LeakClass::Masked, flags);
    b.finish()
}

/// Derandomise: the n^2 XOR matrix that re-pairs the two servers' randomised
/// entries. Bit (i, j) says garbler entry i pairs with evaluator entry j.
pub fn build_derandomise(n: usize) -> Result<Circuit> {
    if n == 0 {
        return Err(Error::Parameter("derandomise needs at least one entry".into()));
    }
    let mut b = Builder::new();
    let rm = b.input("rm", InputOwner::Garbler, n * FLAG_BITS);
    let flags = b.input("flags", InputOwner::Evaluator, n * FLAG_BITS);
    let magic = b.input("magic", InputOwner::Evaluator, FLAG_BITS);
    let mut bits = Vec::with_capacity(n * n);
    for i in 0..n {
        let rmi = &rm[i * FLAG_BITS..(i + 1) * FLAG_BITS];
        for j in 0..n {
            let fj = &flags[j * FLAG_BITS..(j + 1) * FLAG_BITS];
            let mixed: Vec<_> = (0..FLAG_BITS).map(|t| b.xor(fj[t], rmi[t])).collect();
            bits.push(b.eq(&mixed, &magic));
        }
    }
    b.output("pairing", Destination::Both, LeakClass::PairingBits, bits);
    b.finish()
}

/// Query assertion: for each stored outlier, reconstructs the distance to the
/// query point and the threshold from additive shares, compares, and ORs the
/// comparison bits. Only the final disjunction is decoded.
pub fn build_query(outliers: usize, width: usize) -> Result<Circuit> {
    if outliers == 0 {
        return Err(Error::Parameter("query circuit needs outliers".into()));
    }
    Builder::width_check(width)?;
    let mut b = Builder::new();
    let d0 = b.input("dist_g", InputOwner::Garbler, outliers * width);
    let d1 = b.input("dist_e", InputOwner::Evaluator, outliers * width);
    let e0 = b.input("eps_g", InputOwner::Garbler, width);
    let e1 = b.input("eps_e", InputOwner::Evaluator, width);
    let eps = b.adder(&e0, &e1);
    let mut hits = Vec::with_capacity(outliers);
    for i in 0..outliers {
        let g = &d0[i * width..(i + 1) * width];
        let e = &d1[i * width..(i + 1) * width];
        let d = b.adder(g, e);
        let gt = b.gt(&d, &eps);
        hits.push(b.not(gt)); // d <= eps
    }
    let any = b.or_reduce(&hits);
    b.output(
        "assert",
        Destination::Both,
        LeakClass::QueryAssertion,
        alloc::vec![any],
    );
    b.finish()
}

//! Transport, file-format, and orchestration checks for the std crate.

use std::net::TcpListener;
use std::thread;

use ppod::config::RunConfig;
use ppod::data::{self, DatasetSpec};
use ppod::runner::{self, RunOptions};
use ppod::tcp::TcpChannel;
use ppod_core::channel::{tags, Channel, Tag};
use ppod_core::error::ChannelError;
use ppod_core::ot::OtMode;
use ppod_core::protocol::ProtocolConfig;
use ppod_core::ring::Ring;
use sha2::{Digest, Sha256};

fn tcp_pair() -> (TcpChannel, TcpChannel) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let t = thread::spawn(move || TcpChannel::connect(addr).unwrap());
    let (stream, _) = listener.accept().unwrap();
    let a = TcpChannel::new(stream).unwrap();
    (a, t.join().unwrap())
}

#[test]
fn tcp_echo_round_trip() {
    let (mut a, mut b) = tcp_pair();
    a.send(tags::ECHO, b"hello").unwrap();
    assert_eq!(b.recv(tags::ECHO).unwrap(), b"hello");
    b.send(tags::ECHO, b"").unwrap();
    assert_eq!(a.recv(tags::ECHO).unwrap(), b"");
}

#[test]
fn tcp_tag_mismatch_detected() {
    let (mut a, mut b) = tcp_pair();
    a.send(Tag(0x0042), b"x").unwrap();
    assert_eq!(
        b.recv(tags::ECHO).unwrap_err(),
        ChannelError::TagMismatch { expected: tags::ECHO.0, got: 0x0042 }
    );
}

#[test]
fn tcp_large_frame_transfers_intact() {
    let (mut a, mut b) = tcp_pair();
    let payload: Vec<u8> = (0..10_000_000u32).map(|i| (i.wrapping_mul(2_654_435_761)) as u8).collect();
    let want: [u8; 32] = Sha256::digest(&payload).into();
    let t = thread::spawn(move || {
        a.send(tags::GARBLED, &payload).unwrap();
    });
    let got = b.recv(tags::GARBLED).unwrap();
    t.join().unwrap();
    let got_hash: [u8; 32] = Sha256::digest(&got).into();
    assert_eq!(got_hash, want);
}

#[test]
fn config_round_trips_and_rejects_junk() {
    let cfg = RunConfig {
        bits: 48,
        frac_bits: 9,
        window: 24,
        slide: 4,
        k: 3,
        threshold: 777,
        epsilon: 55,
        clamp: false,
    };
    assert_eq!(RunConfig::parse(&cfg.render()).unwrap(), cfg);
    assert!(RunConfig::parse("windw = 4").is_err());
    assert!(RunConfig::parse("window four").is_err());
    // Comments and blank lines are fine.
    let sparse = "# profile override\n\nwindow = 20\nk = 4\n";
    let parsed = RunConfig::parse(sparse).unwrap();
    assert_eq!(parsed.window, 20);
    assert_eq!(parsed.k, 4);
    assert_eq!(parsed.bits, RunConfig::desk().bits);
}

#[test]
fn dataset_generation_is_deterministic_and_plants_outliers() {
    let spec = DatasetSpec {
        points: 60,
        dims: 3,
        clusters: 2,
        outliers: 2,
        spread: 0.04,
        seed: 5,
    };
    let a = data::generate(&spec).unwrap();
    let b = data::generate(&spec).unwrap();
    assert_eq!(data::to_csv(&a), data::to_csv(&b));
    assert_eq!(a.len(), 60);
    assert_eq!(a[0].len(), 3);

    // The planted isolated points have the largest k-distances by a wide
    // margin: find them with the textbook rule.
    let cfg = RunConfig::desk();
    let (lo, hi) = data::bounds(&a);
    let gw = cfg.gateway(lo, hi).unwrap();
    let ints: Vec<Vec<u64>> = a.iter().map(|r| gw.preprocess(r).unwrap()).collect();
    let ring = Ring::new(cfg.bits).unwrap();
    let k = 5;
    let mut kdists: Vec<(u64, usize)> = ints
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut d: Vec<u64> = ints
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, q)| ppod_core::oracle::oracle_distance(ring, p, q))
                .collect();
            d.sort_unstable();
            (d[k - 1], i)
        })
        .collect();
    kdists.sort_unstable();
    let top: Vec<usize> = kdists[58..].iter().map(|&(_, i)| i).collect();
    // Planted positions: every (points/outliers) rows, offset by half.
    assert!(top.contains(&15) && top.contains(&45), "planted ids not extreme: {top:?}");
    // Clear separation between planted and clustered k-distances.
    assert!(kdists[57].0 * 10 < kdists[58].0);
}

#[test]
fn csv_parser_rejects_ragged_rows() {
    assert!(data::parse_csv("1,2\n3\n").is_err());
    assert!(data::parse_csv("").is_err());
    assert!(data::parse_csv("1,abc\n").is_err());
    let ok = data::parse_csv("# header comment\n1.5, 2.5\n\n3.0,4.0\n").unwrap();
    assert_eq!(ok, vec![vec![1.5, 2.5], vec![3.0, 4.0]]);
}

fn small_cfg() -> RunConfig {
    RunConfig {
        bits: 32,
        frac_bits: 8,
        window: 12,
        slide: 3,
        k: 3,
        threshold: 0,
        epsilon: 0,
        clamp: true,
    }
}

fn small_rows() -> Vec<Vec<f64>> {
    data::generate(&DatasetSpec {
        points: 24,
        dims: 2,
        clusters: 2,
        outliers: 2,
        spread: 0.05,
        seed: 9,
    })
    .unwrap()
}

#[test]
fn inproc_and_tcp_transcripts_are_byte_identical() {
    let cfg = small_cfg();
    let rows = small_rows();
    let opts = RunOptions {
        master: 3,
        n_queries: 2,
        ot_mode: OtMode::Ideal,
        verify_oracle: true,
    };
    let a = runner::run_inproc(&cfg, &rows, &opts).unwrap();
    let b = runner::run_tcp_all(&cfg, &rows, &opts).unwrap();
    assert_eq!(a.transcript_p0, b.transcript_p0);
    assert_eq!(a.transcript_p1, b.transcript_p1);
    assert_eq!(a.outcome.metrics, b.outcome.metrics);
    assert_eq!(a.oracle_verdict, Some(true));
    assert_eq!(b.oracle_verdict, Some(true));
    assert_eq!(a.parties_agree, Some(true));
    // The report text itself is reproducible apart from wall times.
    let strip = |s: &str| {
        s.lines()
            .filter(|l| !l.contains("wall_ms"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&a.render()), strip(&b.render()));
}

#[test]
fn undersized_dataset_is_rejected() {
    let cfg = small_cfg();
    let rows = vec![vec![1.0, 2.0]; 5];
    let opts = RunOptions {
        master: 0,
        n_queries: 0,
        ot_mode: OtMode::Ideal,
        verify_oracle: false,
    };
    let err = runner::run_inproc(&cfg, &rows, &opts).unwrap_err();
    assert!(err.to_string().contains("window"), "{err}");
}

#[test]
fn calibrated_threshold_separates_planted_outliers() {
    let cfg = small_cfg();
    let rows = small_rows();
    let proto = ProtocolConfig {
        ring: Ring::new(cfg.bits).unwrap(),
        k: cfg.k,
        window: cfg.window,
        slide: cfg.slide,
    };
    let (lo, hi) = data::bounds(&rows);
    let gw = cfg.gateway(lo, hi).unwrap();
    let init: Vec<Vec<u64>> = rows[..cfg.window].iter().map(|r| gw.preprocess(r).unwrap()).collect();
    let t = runner::calibrate_threshold(&proto, &init);
    assert!(t > 0);
    // At least one point sits above and one below the calibrated line.
    let mut above = 0;
    let mut below = 0;
    for (i, p) in init.iter().enumerate() {
        let mut d: Vec<u64> = init
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, q)| ppod_core::oracle::oracle_distance(proto.ring, p, q))
            .collect();
        d.sort_unstable();
        if d[proto.k - 1] > t {
            above += 1;
        } else {
            below += 1;
        }
    }
    assert!(above >= 1 && below >= proto.window / 2, "above={above} below={below}");
}

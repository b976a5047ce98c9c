use msclab::bp::{regular_ldpc, LdpcCode};
use msclab::channel::sentence_rng;
use msclab::crc::{crc_augment, CrcSpec};
use msclab::harq::*;
use msclab::osd::{decode, DecodeResult};
use msclab::pipeline::{frame_sentence, PipelineConfig};
use msclab::semantic::IdentityProvider;
use msclab::textcodec::{strip_padding, to_bits};
use msclab::{BitVec, Error, LinearCode, MotherCodeSchedule, SimRng};
use rand::SeedableRng;

const SENTENCE: &str = "Two girls are reading books in a quiet library.";

fn schedule(n_m: usize, k: usize) -> MotherCodeSchedule {
    let mother = LinearCode::random(n_m, k, 21).unwrap();
    MotherCodeSchedule::from_round_sizes(mother, &[2 * k, n_m - 2 * k]).unwrap()
}

#[test]
fn throughput_gain_values() {
    assert_eq!(throughput_gain(16, 8).unwrap(), 1.0);
    assert_eq!(throughput_gain(512, 16).unwrap(), 16.0 / 496.0);
    assert_eq!(crc_overhead(512, 16).unwrap(), 0.03125);
    assert_eq!(throughput_gain(64, 0).unwrap(), 0.0);
    assert!(matches!(throughput_gain(8, 8), Err(Error::InvalidArgument(_))));
    assert!(throughput_gain(8, 16).is_err());
}

#[test]
fn first_round_is_half_the_mother_code() {
    let s = schedule(128, 32);
    let mut session = HarqSession::new(&s, HarqConfig::default()).unwrap();
    let frame = frame_sentence(SENTENCE, 16, 32).unwrap();
    let obs = session.first_transmission(&frame, 1.0, &mut SimRng::seed_from_u64(1)).unwrap();
    assert_eq!(obs.len(), 16);
    assert!(obs.iter().all(|o| o.len() == 64));
    assert_eq!(session.code_for(0).n(), 64);
    assert_eq!(session.code_for(0).k(), 32);
    let again = HarqSession::new(&s, HarqConfig::default())
        .unwrap()
        .first_transmission(&frame, 1.0, &mut SimRng::seed_from_u64(1))
        .unwrap();
    assert_eq!(obs, again);
}

#[test]
fn budget_limits_segments_per_sentence() {
    // 128 bits over round-2 sets of n_m - n bits
    for (q, k, expected) in [(8usize, 64usize, 1usize), (16, 32, 2), (32, 16, 4)] {
        let s = schedule(4 * k, k);
        let mut session = HarqSession::new(&s, HarqConfig::default()).unwrap();
        let text: String = SENTENCE.chars().take(q * k / 8).collect();
        let frame = frame_sentence(&text, q, k).unwrap();
        let mut rng = SimRng::seed_from_u64(3);
        session.first_transmission(&frame, 1.0, &mut rng).unwrap();
        let scores = vec![0.0; q];
        assert_eq!(session.select_retransmissions(&scores, &mut rng).len(), expected);
    }
}

#[test]
fn selection_rules() {
    let s = schedule(128, 32);
    let frame = frame_sentence(SENTENCE, 16, 32).unwrap();
    let mut rng = SimRng::seed_from_u64(4);
    let mut session = HarqSession::new(&s, HarqConfig::default()).unwrap();
    session.first_transmission(&frame, 1.0, &mut rng).unwrap();

    assert!(session.select_retransmissions(&[0.9; 16], &mut rng).is_empty());

    let mut scores = vec![0.95; 16];
    scores[3] = 0.05;
    scores[9] = 0.01;
    scores[12] = 0.07;
    assert_eq!(session.select_retransmissions(&scores, &mut rng), vec![9, 3]);

    let random = HarqSession::new(&s, HarqConfig { policy: SelectionPolicy::Random, ..HarqConfig::default() }).unwrap();
    let mut random = random;
    random.first_transmission(&frame, 1.0, &mut rng).unwrap();
    for _ in 0..50 {
        let pick = random.select_retransmissions(&scores, &mut rng);
        assert_eq!(pick.len(), 2);
        assert!(pick.iter().all(|i| [3, 9, 12].contains(i)));
    }
}

#[test]
fn combining_grows_received_positions_and_spends_budget() {
    let s = schedule(128, 32);
    let frame = frame_sentence(SENTENCE, 16, 32).unwrap();
    let mut rng = SimRng::seed_from_u64(5);
    let mut session = HarqSession::new(&s, HarqConfig::default()).unwrap();
    session.first_transmission(&frame, 1.0, &mut rng).unwrap();
    let before = session.observation(2);
    session.retransmit_and_combine(&[2]).unwrap();
    let after = session.observation(2);
    assert_eq!(after.len(), 128);
    assert_eq!(&after.values()[..64], before.values());
    assert_eq!(session.received_positions(2), (0..128).collect::<Vec<_>>());
    assert_eq!(session.budget_bits(), 64);
    assert_eq!(session.code_for(2).n(), 128);
    assert_eq!(session.code_for(3).n(), 64);
    // all rounds used: nothing more to select
    assert!(session.select_retransmissions(&[0.0; 16], &mut rng).is_empty());
}

#[test]
fn over_budget_request_fails() {
    let s = schedule(128, 32);
    let frame = frame_sentence(SENTENCE, 16, 32).unwrap();
    let mut rng = SimRng::seed_from_u64(6);
    let mut session = HarqSession::new(&s, HarqConfig::default()).unwrap();
    session.first_transmission(&frame, 1.0, &mut rng).unwrap();
    assert_eq!(session.retransmit_and_combine(&[0, 1, 2]), Err(Error::Budget { needed: 192, remaining: 128 }));
    assert_eq!(session.budget_bits(), 128);
}

#[test]
fn max_rounds_one_never_retransmits() {
    let s = schedule(128, 32);
    let frame = frame_sentence(SENTENCE, 16, 32).unwrap();
    let harq = HarqConfig { max_rounds: 1, t_harq: 1.1, ..HarqConfig::default() };
    let out = run_sharq(&s, harq, &IdentityProvider, &frame, -2.0, &PipelineConfig::default(), &mut SimRng::seed_from_u64(7))
        .unwrap();
    assert!(out.retransmitted.is_empty());
    assert_eq!(out.bits_used, 0);
    assert_eq!(out.unresolved.len(), 16);
}

#[test]
fn noiseless_session_needs_no_retransmission() {
    let s = schedule(128, 32);
    let frame = frame_sentence(SENTENCE, 16, 32).unwrap();
    let out = run_sharq(&s, HarqConfig::default(), &IdentityProvider, &frame, 40.0, &PipelineConfig::default(), &mut SimRng::seed_from_u64(8))
        .unwrap();
    assert!(out.retransmitted.is_empty());
    assert_eq!(strip_padding(&out.last.sld, frame.pad_len), SENTENCE);
}

#[test]
fn retransmission_repairs_low_score_segments() {
    let s = schedule(128, 32);
    let config = PipelineConfig { osd_order: 1, ..PipelineConfig::default() };
    let mut improved = 0;
    let mut worse = 0;
    for sent in 0..60 {
        let frame = frame_sentence(SENTENCE, 16, 32).unwrap();
        let mut rng = sentence_rng(10, 0, sent);
        let out = run_sharq(&s, HarqConfig::default(), &IdentityProvider, &frame, -1.0, &config, &mut rng).unwrap();
        let truth: Vec<char> = frame.padded_text().chars().collect();
        let errs = |t: &str| t.chars().zip(&truth).filter(|(a, b)| a != *b).count();
        if let Some(first) = out.retransmitted.first() {
            assert!(first.len() <= 2);
            let a = errs(&out.first.sld);
            let b = errs(&out.last.sld);
            improved += (b < a) as usize;
            worse += (b > a) as usize;
        }
    }
    assert!(improved > 10 && improved > 3 * worse, "improved {improved}, worse {worse}");
}

#[test]
fn full_mother_code_beats_first_round() {
    let s = schedule(64, 16);
    let round1 = s.puncture(1).unwrap();
    let full = s.puncture(2).unwrap();
    let frame = frame_sentence(&"ab".repeat(32), 32, 16).unwrap();
    let (mut e1, mut e2) = (0, 0);
    for sent in 0..100 {
        let mut session = HarqSession::new(&s, HarqConfig { budget_bits: 32 * 32, ..HarqConfig::default() }).unwrap();
        let mut rng = sentence_rng(11, 0, sent);
        session.first_transmission(&frame, 0.0, &mut rng).unwrap();
        let r1: Vec<DecodeResult> = (0..32).map(|i| decode(&round1, &session.observation(i), 2).unwrap()).collect();
        session.retransmit_and_combine(&(0..32).collect::<Vec<_>>()).unwrap();
        for i in 0..32 {
            let r2 = decode(&full, &session.observation(i), 2).unwrap();
            e1 += (r1[i].info != frame.bitstreams[i]) as usize;
            e2 += (r2.info != frame.bitstreams[i]) as usize;
        }
    }
    assert!(e2 * 2 < e1, "round 1 {e1}, combined {e2}");
}

#[test]
fn crc_harq_retransmits_only_failing_segments() {
    let mother = LinearCode::random(64, 16, 5).unwrap();
    let s = MotherCodeSchedule::from_round_sizes(mother, &[32, 32]).unwrap();
    let codec = crc_augment(16, CrcSpec::Crc8).unwrap();
    let frame = frame_sentence("A cat naps on the mat.", 32, codec.payload_len()).unwrap();
    // effective rate of the first round: 8 payload bits over 32
    assert_eq!(codec.payload_len() as f64 / 32.0, 0.25);

    let out = run_crc_harq(&s, &codec, HarqConfig::default(), &frame, 40.0, 2, &mut SimRng::seed_from_u64(1)).unwrap();
    assert!(out.first_failures.is_empty() && out.retransmitted.is_empty());
    assert_eq!(strip_padding(&out.text, frame.pad_len), "A cat naps on the mat.");

    let mut undetected = 0;
    for sent in 0..40 {
        let out = run_crc_harq(&s, &codec, HarqConfig::default(), &frame, -1.0, 2, &mut sentence_rng(2, 0, sent)).unwrap();
        if let Some(r) = out.retransmitted.first() {
            assert!(r.iter().all(|i| out.first_failures.contains(i)));
            assert!(r.len() <= 4);
        }
        undetected += out.undetected;
    }
    // 8-bit CRC: undetected errors are possible but rare
    assert!(undetected < 40);
}

#[test]
fn crc_round_flags_exactly_the_failures() {
    let codec = crc_augment(16, CrcSpec::Crc8).unwrap();
    let good = codec.append(&to_bits("a").unwrap()).unwrap();
    let mut bad = good.clone();
    bad.flip(3);
    let mk = |info: BitVec| DecodeResult {
        codeword: info.clone(),
        info,
        whd: 0.0,
        tep: BitVec::zeros(16),
        tep_weight: 0,
        teps_evaluated: 1,
    };
    assert_eq!(crc_harq_round(&codec, &[mk(good.clone()), mk(bad), mk(good)]), vec![1]);
}

#[test]
fn long_code_round_trip() {
    let ldpc = LdpcCode::new(regular_ldpc(96, 3, 6, 7).unwrap(), 50).unwrap();
    let link = LongCodeLink::new(ldpc).unwrap();
    let payload = to_bits("Hi!").unwrap();
    let out = link.transmit(&payload, 30.0, link.n(), 0, &mut SimRng::seed_from_u64(1)).unwrap();
    assert!(out.converged);
    assert_eq!(out.payload, payload);
    let c = link.encode(&payload).unwrap();
    assert!(link.ldpc().syndrome_is_zero(&c));
    // punctured first round, repaired with extra positions when needed
    let out = link.transmit(&payload, 6.0, link.k() + 8, 64, &mut SimRng::seed_from_u64(2)).unwrap();
    assert!(out.bits_used == 0 || out.bits_used == 40);
}

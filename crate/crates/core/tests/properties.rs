use std::sync::{Arc, OnceLock};

use gibbsrec::ifs::{tilde_recurrence_sandwich, CertifiedIfs, IfsSpec};
use gibbsrec::numeric::glog;
use gibbsrec::recurrence::{psi_minus, psi_plus, RateFunction};
use gibbsrec::sft::{z_array, SftSpec, Word};
use proptest::prelude::*;

const H: f64 = 0.500_402_423_538_187_9;
const RHO: f64 = 0.307_489_928_907_648_9;

fn four_corner() -> &'static CertifiedIfs {
    static C: OnceLock<CertifiedIfs> = OnceLock::new();
    C.get_or_init(|| CertifiedIfs::certify(IfsSpec::four_corner(), 12).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn z_array_is_longest_prefix_match(s in prop::collection::vec(0u16..3, 1..200)) {
        let z = z_array(&s);
        for p in 1..s.len() {
            let naive = s[p..].iter().zip(&s).take_while(|(a, b)| a == b).count();
            prop_assert_eq!(z[p] as usize, naive);
        }
    }

    #[test]
    fn thresholds_sit_above_the_leading_term(n in 1u64..1_000_000_000, eps in 0.01f64..0.99) {
        let m = psi_minus(n, H, RHO, eps).unwrap();
        let p = psi_plus(n, H, RHO, eps).unwrap();
        let lead = (glog(n as f64) / H).floor() as u64;
        prop_assert!(lead <= m && m <= p, "{lead} {m} {p}");
    }

    #[test]
    fn sandwich_contains_certified_events(
        s in prop::collection::vec(0u16..4, 20..300),
        table in prop::collection::vec(0u64..6, 300),
    ) {
        let sft = Arc::new(SftSpec::full_shift(4).unwrap());
        let len = s.len();
        let w = Word::from_zero_based(sft, s).unwrap();
        let psi = RateFunction::table(table).unwrap();
        let rep = tilde_recurrence_sandwich(&w, &psi, four_corner(), 1, len as u64).unwrap();
        prop_assert!(rep.included);
        prop_assert!(rep.numeric_ok);
        let certified = rep.certified_events();
        let possible = rep.possible_events();
        prop_assert!(certified.iter().all(|n| possible.contains(n)));
    }

    #[test]
    fn projections_of_shared_prefixes_are_close(
        a in prop::collection::vec(0u16..4, 40),
        b in prop::collection::vec(0u16..4, 40),
        m in 0usize..30,
    ) {
        let ifs = four_corner();
        let sft = Arc::new(SftSpec::full_shift(4).unwrap());
        let mut b = b;
        b[..m].copy_from_slice(&a[..m]);
        let (x, ex) = ifs.project(&Word::from_zero_based(sft.clone(), a).unwrap(), 40).unwrap();
        let (y, ey) = ifs.project(&Word::from_zero_based(sft, b).unwrap(), 40).unwrap();
        let d = x.iter().zip(&y).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        prop_assert!(d <= ifs.r().powi(m as i32) * ifs.bounds.diam_upper + ex + ey + 1e-12);
    }
}

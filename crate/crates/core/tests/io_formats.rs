mod common;

use common::random_ecf;
use ecf_toolkit::ecf::compute_tau;
use ecf_toolkit::io::{
    ecf_from_json, ecf_to_json, fmt_g17, parse_json, read_samples_csv, set_function_from_json, set_function_to_json,
    tau_from_json, tau_to_json, to_json_string, write_samples_csv,
};
use ecf_toolkit::{EcfTable, GroundSet, SampleBatch, SetFunction};
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO
}

proptest! {
    #[test]
    fn g17_round_trips(v in finite()) {
        prop_assert_eq!(fmt_g17(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn set_function_json_is_exact(m in 1usize..=5, vals in prop::collection::vec(finite(), 32)) {
        let f = SetFunction::new(m, vals[..1 << m].to_vec()).unwrap();
        let text = to_json_string(&set_function_to_json(&f).unwrap());
        let back = set_function_from_json(&parse_json(&text).unwrap()).unwrap();
        for (a, b) in back.values().iter().zip(f.values()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn tables_round_trip(seed in any::<u64>(), m in 1usize..=6) {
        let ecf = random_ecf(m, seed);
        let labels: Vec<String> = (0..m).map(|t| format!("site{t}")).collect();
        let ecf = EcfTable::new(GroundSet::new(labels).unwrap(), ecf.theta().clone()).unwrap();
        let back = ecf_from_json(&parse_json(&to_json_string(&ecf_to_json(&ecf))).unwrap()).unwrap();
        prop_assert_eq!(&back, &ecf);
        let tau = compute_tau(&ecf).unwrap();
        let back = tau_from_json(&parse_json(&to_json_string(&tau_to_json(&tau))).unwrap()).unwrap();
        prop_assert_eq!(back, tau);
    }

    #[test]
    fn samples_csv_is_exact(vals in prop::collection::vec(1e-300f64..1e300, 3..60)) {
        let n = vals.len() / 3;
        let batch = SampleBatch::new(vec!["a".into(), "b".into(), "c".into()], 1, vals[..3 * n].to_vec()).unwrap();
        let mut buf = Vec::new();
        write_samples_csv(&mut buf, &batch).unwrap();
        prop_assert_eq!(read_samples_csv(buf.as_slice(), 1).unwrap(), batch);
    }
}

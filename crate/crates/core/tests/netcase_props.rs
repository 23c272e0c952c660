mod common;

use proptest::prelude::*;
use vscfdi::measmodel::StateLayout;
use vscfdi::netcase::{
    bundled_ieee14_case, parse_case, parse_case_with_state, write_case, write_case_json,
    IEEE14_CASE_TEXT,
};

use common::{four_bus, offsets, perturbed};

#[test]
fn bundled_text_parses_to_bundled_case() {
    let (case, op) = bundled_ieee14_case();
    let (parsed, st) = parse_case_with_state(IEEE14_CASE_TEXT).unwrap();
    assert_eq!(parsed, case);
    assert_eq!(st.unwrap(), op);
}

#[test]
fn four_bus_fixture_is_valid() {
    let (case, x) = four_bus();
    case.validate().unwrap();
    assert_eq!(StateLayout::for_case(&case).len(), 13);
    assert_eq!(x.vmag.len(), 4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn text_and_json_round_trip(
        g in proptest::collection::vec(0.1f64..10.0, 20),
        b in proptest::collection::vec(-30.0f64..-0.5, 20),
        off in offsets(33),
        json in any::<bool>(),
    ) {
        let (mut case, op) = bundled_ieee14_case();
        for (k, br) in case.branches.iter_mut().enumerate() {
            br.admittance.re = g[k];
            br.admittance.im = b[k];
        }
        let layout = StateLayout::for_case(&case);
        let x = perturbed(&layout, &op.state, &off, 0.2);
        let text = if json { write_case_json(&case, Some(&x)) } else { write_case(&case, Some(&x)) };
        let (back, st) = parse_case_with_state(&text).unwrap();
        prop_assert_eq!(&back, &case);
        prop_assert_eq!(st.unwrap().state, x);
        prop_assert_eq!(parse_case(&write_case(&back, None)).unwrap(), case);
    }
}

use super::{parse_case_with_state, NetworkCase, OperatingState};

/// Text of the bundled modified IEEE-14 case (`data/ieee14_vsc.case`).
pub const IEEE14_CASE_TEXT: &str = include_str!("../../data/ieee14_vsc.case");

/// The modified IEEE-14 case with its pre-attack ground-truth operating state.
pub fn bundled_ieee14_case() -> (NetworkCase, OperatingState) {
    let (case, state) =
        parse_case_with_state(IEEE14_CASE_TEXT).expect("bundled case file is well-formed");
    (case, state.expect("bundled case carries a [state] section"))
}

use proptest::prelude::*;
use scenesmith_core::plan::{SceneId, SymbolEntry, SymbolLedger};
use scenesmith_core::units::{format_base_units, parse_unit, Dimension};

mod support;
use support::unit_exprs::{dimension, exponent, expr, term};

const CASES: u32 = 1000;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn parser_is_a_homomorphism(e in expr()) {
        prop_assert_eq!(parse_unit(&e.text).unwrap(), e.dim, "{}", e.text);
    }

    #[test]
    fn product_and_quotient_of_terms(a in term(), b in term()) {
        let pa = parse_unit(&a.text).unwrap();
        let pb = parse_unit(&b.text).unwrap();
        prop_assert_eq!(parse_unit(&format!("{} * {}", a.text, b.text)).unwrap(), pa.mul(&pb));
        prop_assert_eq!(parse_unit(&format!("{} / {}", a.text, b.text)).unwrap(), pa.div(&pb));
    }

    #[test]
    fn self_division_cancels(e in term()) {
        let d = parse_unit(&format!("{0} / {0}", e.text)).unwrap();
        prop_assert!(d.is_dimensionless(), "{} / {} gave {}", e.text, e.text, d);
        prop_assert_eq!(e.dim.mul(&e.dim.recip()), Dimension::dimensionless());
    }

    #[test]
    fn pow_distributes(a in dimension(), b in dimension(), q in exponent()) {
        prop_assert_eq!(a.mul(&b).pow(q), a.pow(q).mul(&b.pow(q)));
        prop_assert_eq!(a.div(&b), a.mul(&b.recip()));
    }

    #[test]
    fn canonical_form_reparses(d in dimension()) {
        prop_assert_eq!(parse_unit(&format_base_units(&d)).unwrap(), d);
        let json = serde_json::to_string(&d).unwrap();
        prop_assert_eq!(serde_json::from_str::<Dimension>(&json).unwrap(), d);
    }

    #[test]
    fn ledger_round_trips_through_json(entries in prop::collection::vec((0usize..12, expr(), 1u32..6), 1..10)) {
        let mut ledger = SymbolLedger::new();
        for (i, (name, e, scene)) in entries.iter().enumerate() {
            let entry = SymbolEntry::new(format!("x{name}"), format!("quantity {i}"), e.text.clone(), SceneId(*scene)).unwrap();
            let _ = ledger.register(entry);
        }
        let json = serde_json::to_string(&ledger).unwrap();
        let back: SymbolLedger = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(&back, &ledger);
        for entry in back.entries() {
            prop_assert_eq!(parse_unit(&entry.unit_expr).unwrap(), entry.dimension);
        }
    }

    #[test]
    fn reregistering_same_entry_is_idempotent(e in expr()) {
        let mut ledger = SymbolLedger::new();
        let entry = SymbolEntry::new("v", "speed", e.text.clone(), SceneId(1)).unwrap();
        ledger.register(entry.clone()).unwrap();
        ledger.register(entry).unwrap();
        prop_assert_eq!(ledger.len(), 1);
    }
}

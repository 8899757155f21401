//! Assembler round trips on generated sources.

mod common;

use common::random_unit_program;
use proptest::prelude::*;
use sbst_core::asm::{emit_program, parse_program, AluOp};

fn alu_line(op: usize, rd: u8, rs1: u8, rs2: u8) -> String {
    format!(
        "{} r{rd}, r{rs1}, r{rs2}",
        AluOp::ALL[op].mnemonic().as_str()
    )
}

proptest! {
    #[test]
    fn emit_then_parse_is_identity(seed in any::<u64>(), len in 10usize..60) {
        let p = parse_program(&random_unit_program(seed, len), "p", 8).unwrap();
        let text = emit_program(&p);
        let again = parse_program(&text, "p", 8).unwrap();
        prop_assert_eq!(&again, &p);
        prop_assert_eq!(emit_program(&again), text);
    }

    #[test]
    fn alu_mnemonics_round_trip(ops in proptest::collection::vec((0usize..8, 0u8..16, 0u8..16, 0u8..16), 1..20), upper in any::<bool>()) {
        let mut text: String = ops.iter().map(|&(o, d, a, b)| alu_line(o, d, a, b) + "\n").collect();
        text.push_str("halt\n");
        if upper {
            text = text.to_uppercase();
        }
        let p = parse_program(&text, "p", 8).unwrap();
        prop_assert_eq!(p.len(), ops.len() + 1);
        prop_assert_eq!(parse_program(&emit_program(&p), "p", 8).unwrap(), p);
    }

    #[test]
    fn immediates_respect_word_width(width in 1u32..=16, v in -70000i64..70000) {
        let text = format!("li r1, {v}\nhalt");
        let lo = -(1i64 << (width - 1));
        let hi = (1i64 << width) - 1;
        prop_assert_eq!(parse_program(&text, "p", width).is_ok(), (lo..=hi).contains(&v));
    }
}

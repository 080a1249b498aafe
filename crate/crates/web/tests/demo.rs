use bitext_web::{align, bleu, identify};

#[test]
fn aligns_a_short_abstract() {
    let en = "Nitrogen limits maize yield in tropical soils. Fertilizer prices have risen.\n\n\
              Yield increased with the dose up to 120 kg per hectare.";
    let pt = "O nitrogênio limita a produtividade do milho em solos tropicais. Os preços dos fertilizantes subiram.\n\n\
              A produtividade aumentou com a dose até 120 kg por hectare.";
    let pairs = align(en, pt, "en", "pt").unwrap();
    assert_eq!(pairs.len(), 3);
    assert!(pairs.iter().all(|p| p.kind == "1-1"));
    assert!(pairs[2].tgt.starts_with("A produtividade"));
}

#[test]
fn unequal_paragraphs_fall_back_to_whole_text() {
    let pairs = align("One sentence here.\n\nAnother one there.", "Una frase aquí. Otra allí.", "en", "es").unwrap();
    assert!(!pairs.is_empty());
}

#[test]
fn rejects_bad_input() {
    assert!(align("", "texto", "en", "pt").is_err());
    assert!(align("a", "b", "fr", "pt").is_err());
    assert!(identify("  ").is_err());
}

#[test]
fn identifies_spanish() {
    let d = identify("Entre sus objetivos está defender los intereses de la sociedad y de la Enfermería.").unwrap();
    assert_eq!(d.lang, "es");
    assert!(d.margin.unwrap() > 0.0);
    assert_eq!(d.distances.len(), 3);
}

#[test]
fn bleu_line() {
    assert!(bleu("a b c d\n", "a b c d\n", false).unwrap().starts_with("BLEU = 100.00"));
    assert!(bleu("a\nb\n", "a\n", false).is_err());
}

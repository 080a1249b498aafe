//! Trilingual units from two bilingual pair sets that share a pivot language.
//!
//! Pairs are joined on the exact set of pivot-side sentence positions within
//! an article, never on text: a repeated sentence must not create a join, and
//! pairs of different bead granularity are left unjoined.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::model::{AlignedPair, Lang, SentencePos, TrilingualUnit};

/// The non-pivot language shared by all pairs in `pairs`.
fn other_language(pairs: &[AlignedPair], pivot: Lang) -> Result<Option<Lang>> {
    let mut other = None;
    for p in pairs {
        let o = if p.src_lang == pivot {
            p.tgt_lang
        } else if p.tgt_lang == pivot {
            p.src_lang
        } else {
            return Err(Error::PivotMismatch(format!(
                "pair {} of {} does not contain pivot {pivot}",
                p.pair(),
                p.article_id
            )));
        };
        match other {
            None => other = Some(o),
            Some(x) if x != o => {
                return Err(Error::PivotMismatch(format!("pair list mixes {x} and {o} with pivot {pivot}")))
            }
            _ => {}
        }
    }
    Ok(other)
}

type JoinKey<'a> = (&'a str, &'a [SentencePos]);

pub fn join_trilingual(ab: &[AlignedPair], ac: &[AlignedPair], pivot: Lang) -> Result<Vec<TrilingualUnit>> {
    let (b, c) = (other_language(ab, pivot)?, other_language(ac, pivot)?);
    let (Some(b), Some(c)) = (b, c) else {
        return Ok(Vec::new());
    };
    if b == c {
        return Err(Error::PivotMismatch(format!("both pair lists pair {pivot} with {b}")));
    }

    let key = |p: &'_ AlignedPair| -> Option<(String, Vec<SentencePos>)> {
        let (_, pos) = p.side(pivot)?;
        Some((p.article_id.clone(), pos.to_vec()))
    };
    let mut index: HashMap<JoinKey<'_>, &AlignedPair> = HashMap::new();
    for p in ac {
        if let Some((_, pos)) = p.side(pivot) {
            index.entry((p.article_id.as_str(), pos)).or_insert(p);
        }
    }
    let mut units: BTreeMap<(String, Vec<SentencePos>), TrilingualUnit> = BTreeMap::new();
    for p in ab {
        let Some((article, pos)) = key(p) else { continue };
        if pos.is_empty() || units.contains_key(&(article.clone(), pos.clone())) {
            continue;
        }
        let Some(q) = index.get(&(article.as_str(), pos.as_slice())) else {
            continue;
        };
        let mut texts = BTreeMap::new();
        let mut positions = BTreeMap::new();
        for (pair, lang) in [(p, pivot), (p, b), (*q, c)] {
            let (text, at) = pair.side(lang).expect("language checked above");
            texts.insert(lang, text.to_string());
            positions.insert(lang, at.to_vec());
        }
        units.insert(
            (article.clone(), pos),
            TrilingualUnit {
                article_id: article,
                texts,
                positions,
            },
        );
    }
    Ok(units.into_values().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BeadKind;

    fn pos(i: u32) -> SentencePos {
        SentencePos {
            section: 0,
            paragraph: 0,
            sentence: i,
        }
    }

    fn pair(article: &str, src: Lang, tgt: Lang, src_pos: &[u32], tgt_pos: &[u32], src_text: &str, tgt_text: &str) -> AlignedPair {
        AlignedPair {
            src_lang: src,
            tgt_lang: tgt,
            src_text: src_text.into(),
            tgt_text: tgt_text.into(),
            article_id: article.into(),
            score: 1.0,
            provenance: BeadKind::OneOne,
            src_positions: src_pos.iter().map(|&i| pos(i)).collect(),
            tgt_positions: tgt_pos.iter().map(|&i| pos(i)).collect(),
        }
    }

    const EN: &str = "Among its objectives, it aims to defend the interests of society and Nursing.";
    const PT: &str = "Entre seus objetivos, visa defender os interesses da sociedade e da Enfermagem.";
    const ES: &str = "Entre sus objetivos está defender los intereses de la sociedad y de la Enfermería.";

    #[test]
    fn shared_pivot_sentence_joins() {
        let ab = [pair("A", Lang::En, Lang::Pt, &[5], &[5], EN, PT)];
        let ac = [pair("A", Lang::En, Lang::Es, &[5], &[4], EN, ES)];
        let units = join_trilingual(&ab, &ac, Lang::En).unwrap();
        assert_eq!(units.len(), 1);
        assert_eq!(units[0].texts[&Lang::En], EN);
        assert_eq!(units[0].texts[&Lang::Pt], PT);
        assert_eq!(units[0].texts[&Lang::Es], ES);
        assert_eq!(units[0].positions[&Lang::Es], [pos(4)]);
        units[0].validate().unwrap();
        // Swapping the inputs yields the same units.
        assert_eq!(join_trilingual(&ac, &ab, Lang::En).unwrap(), units);
    }

    #[test]
    fn unmatched_or_mismatched_granularity() {
        let ab = [pair("A", Lang::En, Lang::Pt, &[5, 6], &[5], "x y", "z")];
        let ac = [pair("A", Lang::En, Lang::Es, &[5], &[5], "x", "w")];
        assert!(join_trilingual(&ab, &ac, Lang::En).unwrap().is_empty());
        let ac = [pair("B", Lang::En, Lang::Es, &[5, 6], &[5], "x y", "w")];
        assert!(join_trilingual(&ab, &ac, Lang::En).unwrap().is_empty());
    }

    #[test]
    fn pivot_on_either_side() {
        let ab = [pair("A", Lang::Pt, Lang::En, &[1], &[2], PT, EN)];
        let ac = [pair("A", Lang::En, Lang::Es, &[2], &[1], EN, ES)];
        assert_eq!(join_trilingual(&ab, &ac, Lang::En).unwrap().len(), 1);
    }

    #[test]
    fn pivot_errors() {
        let ab = [pair("A", Lang::Pt, Lang::Es, &[1], &[1], PT, ES)];
        let ac = [pair("A", Lang::En, Lang::Es, &[1], &[1], EN, ES)];
        assert!(matches!(join_trilingual(&ab, &ac, Lang::En), Err(Error::PivotMismatch(_))));
        let ab = [pair("A", Lang::En, Lang::Es, &[1], &[1], EN, ES)];
        assert!(matches!(join_trilingual(&ab, &ac, Lang::En), Err(Error::PivotMismatch(_))));
    }

    #[test]
    fn ordered_by_article_then_position() {
        let ab = [
            pair("B", Lang::En, Lang::Pt, &[0], &[0], "b0", "pb0"),
            pair("A", Lang::En, Lang::Pt, &[3], &[3], "a3", "pa3"),
            pair("A", Lang::En, Lang::Pt, &[1], &[1], "a1", "pa1"),
        ];
        let ac = [
            pair("A", Lang::En, Lang::Es, &[1], &[1], "a1", "ea1"),
            pair("B", Lang::En, Lang::Es, &[0], &[0], "b0", "eb0"),
            pair("A", Lang::En, Lang::Es, &[3], &[3], "a3", "ea3"),
        ];
        let units = join_trilingual(&ab, &ac, Lang::En).unwrap();
        let order: Vec<&str> = units.iter().map(|u| u.texts[&Lang::En].as_str()).collect();
        assert_eq!(order, ["a1", "a3", "b0"]);
    }
}

//! Brute-force reference for the aligner: exhaustive bead enumeration and
//! independently computed costs.

#![allow(dead_code)]

use bitext::model::{check_bead_coverage, Bead, BeadKind, Lang, Sentence, SentencePos, SentenceRef};

/// ln(2·(1 − Φ(a))) for a ≥ 0 by Simpson integration of the normal density.
pub fn ln_two_tail(a: f64) -> f64 {
    let a = a.abs();
    let steps = 12_000;
    let h = 40.0 / steps as f64;
    // Factor out the density at `a` to keep the integrand well scaled.
    let f = |t: f64| (-(t * t - a * a) / 2.0).exp();
    let mut sum = f(a) + f(a + 40.0);
    for k in 1..steps {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + k as f64 * h);
    }
    let integral = sum * h / 3.0;
    (2.0f64).ln() + (integral / (2.0 * std::f64::consts::PI).sqrt()).ln() - a * a / 2.0
}

pub fn prior(kind: BeadKind) -> f64 {
    match kind {
        BeadKind::OneOne => 0.89,
        BeadKind::OneZero | BeadKind::ZeroOne => 0.0099,
        BeadKind::TwoOne | BeadKind::OneTwo => 0.0445,
        BeadKind::TwoTwo => 0.011,
    }
}

pub fn delta(s: usize, t: usize, c: f64) -> f64 {
    let (s, t) = (s as f64, t as f64);
    if s > 0.0 {
        (t - s * c) / (s * 6.8).sqrt()
    } else if t > 0.0 {
        (t / 6.8).sqrt()
    } else {
        0.0
    }
}

pub fn oracle_length_cost(kind: BeadKind, s: usize, t: usize, c: f64) -> f64 {
    -prior(kind).ln() - ln_two_tail(delta(s, t, c))
}

/// Every monotone bead sequence covering an `n` × `m` grid.
pub fn all_sequences(n: usize, m: usize) -> Vec<Vec<Bead>> {
    fn go(i: usize, j: usize, n: usize, m: usize, cur: &mut Vec<Bead>, out: &mut Vec<Vec<Bead>>) {
        if (i, j) == (n, m) {
            out.push(cur.clone());
            return;
        }
        for kind in BeadKind::ALL {
            let (di, dj) = kind.sizes();
            if i + di <= n && j + dj <= m {
                cur.push(Bead::new(kind, i, j));
                go(i + di, j + dj, n, m, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(0, 0, n, m, &mut Vec::new(), &mut out);
    out
}

pub fn kinds(beads: &[Bead]) -> Vec<BeadKind> {
    beads.iter().map(|b| b.kind).collect()
}

/// Checks `got` against the enumerated optimum under `cost`. When the best
/// sequence is separated from all others by more than rounding noise, the
/// sequences must be identical; otherwise `got` must be co-optimal.
pub fn assert_optimal(got: &[Bead], n: usize, m: usize, cost: impl Fn(&Bead) -> f64) {
    check_bead_coverage(got, n, m).unwrap();
    let mut memo = std::collections::HashMap::new();
    let mut cost = |b: &Bead| *memo.entry((b.kind, b.src_start, b.tgt_start)).or_insert_with(|| cost(b));
    let mut scored: Vec<(f64, Vec<Bead>)> = all_sequences(n, m)
        .into_iter()
        .map(|seq| (seq.iter().map(|b| cost(b)).sum(), seq))
        .collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let best = scored[0].0;
    let got_cost: f64 = got.iter().map(|b| cost(b)).sum();
    assert!(
        got_cost <= best + 1e-6,
        "aligner cost {got_cost} exceeds optimum {best}: got {:?}, best {:?}",
        kinds(got),
        kinds(&scored[0].1)
    );
    if scored.len() > 1 && scored[1].0 - best > 1e-6 {
        assert_eq!(kinds(got), kinds(&scored[0].1));
        let starts = |b: &[Bead]| b.iter().map(|x| (x.src_start, x.tgt_start)).collect::<Vec<_>>();
        assert_eq!(starts(got), starts(&scored[0].1));
    }
}

pub fn sents(texts: &[String], lang: Lang) -> Vec<Sentence> {
    texts
        .iter()
        .enumerate()
        .map(|(k, t)| Sentence {
            text: t.clone(),
            doc_ref: SentenceRef {
                article_id: "T".into(),
                lang,
                pos: SentencePos {
                    section: 0,
                    paragraph: 0,
                    sentence: k as u32,
                },
            },
        })
        .collect()
}

pub fn side_len(lens: &[usize], start: usize, count: usize) -> usize {
    lens[start..start + count].iter().sum()
}


/// Second-pass cost as the aligner defines it: the length probability and
/// dictionary coverage blended by weight, normalized so that no coverage
/// gives back the plain length cost.
pub fn oracle_realign_cost(kind: BeadKind, s_len: usize, t_len: usize, c: f64, coverage: f64) -> f64 {
    if coverage == 0.0 {
        return oracle_length_cost(kind, s_len, t_len, c);
    }
    let p_len = ln_two_tail(delta(s_len, t_len, c)).exp();
    -prior(kind).ln() - (0.3 * p_len + 0.7 * coverage).ln() + 0.3f64.ln()
}

pub fn tokens(text: &str) -> Vec<String> {
    let mut t: Vec<String> = text
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| w.chars().count() >= 2)
        .map(str::to_string)
        .collect();
    t.sort();
    t.dedup();
    t
}

pub fn coverage(src: &[&String], tgt: &[&String], pairs: &[(String, String)]) -> f64 {
    let s: Vec<String> = {
        let mut v: Vec<String> = src.iter().flat_map(|x| tokens(x)).collect();
        v.sort();
        v.dedup();
        v
    };
    let t: Vec<String> = {
        let mut v: Vec<String> = tgt.iter().flat_map(|x| tokens(x)).collect();
        v.sort();
        v.dedup();
        v
    };
    if s.is_empty() || t.is_empty() || pairs.is_empty() {
        return 0.0;
    }
    let linked = |a: &String, b: &String| pairs.iter().any(|(x, y)| x == a && y == b);
    let cs = s.iter().filter(|a| t.iter().any(|b| linked(a, b))).count();
    let ct = t.iter().filter(|b| s.iter().any(|a| linked(a, b))).count();
    (cs + ct) as f64 / (s.len() + t.len()) as f64
}

pub fn realign_oracle_cost(src: &[String], tgt: &[String], pairs: &[(String, String)], b: &Bead) -> f64 {
    let (di, dj) = b.kind.sizes();
    let s = &src[b.src_start..b.src_start + di];
    let t = &tgt[b.tgt_start..b.tgt_start + dj];
    let s_len: usize = s.iter().map(|x| x.chars().count()).sum();
    let t_len: usize = t.iter().map(|x| x.chars().count()).sum();
    let total_s: usize = src.iter().map(|x| x.chars().count()).sum();
    let total_t: usize = tgt.iter().map(|x| x.chars().count()).sum();
    let c = if total_s > 0 && total_t > 0 {
        total_t as f64 / total_s as f64
    } else {
        1.0
    };
    let cov = coverage(&s.iter().collect::<Vec<_>>(), &t.iter().collect::<Vec<_>>(), pairs);
    oracle_realign_cost(b.kind, s_len, t_len, c, cov)
}

/// Costs closer than this are treated as equal when applying the tie-break.
pub const TIE_TOLERANCE: f64 = 1e-7;

/// The sequence the aligner is documented to return: minimum total cost;
/// among equal costs the most 1-1 beads; then, bead by bead from the start,
/// the earliest kind in [`BeadKind::ALL`].
pub fn brute_force_best(n: usize, m: usize, cost: impl Fn(&Bead) -> f64) -> (Vec<Bead>, bool) {
    let mut memo = std::collections::HashMap::new();
    let mut cost = |b: &Bead| *memo.entry((b.kind, b.src_start, b.tgt_start)).or_insert_with(|| cost(b));
    let scored: Vec<(f64, Vec<Bead>)> = all_sequences(n, m)
        .into_iter()
        .map(|seq| (seq.iter().map(|b| cost(b)).sum(), seq))
        .collect();
    let best = scored.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let tied: Vec<&Vec<Bead>> = scored
        .iter()
        .filter(|s| s.0 - best <= TIE_TOLERANCE)
        .map(|s| &s.1)
        .collect();
    let ones = |seq: &Vec<Bead>| seq.iter().filter(|b| b.kind == BeadKind::OneOne).count();
    let most = tied.iter().map(|s| ones(s)).max().unwrap_or(0);
    let order = |seq: &Vec<Bead>| -> Vec<usize> {
        seq.iter()
            .map(|b| BeadKind::ALL.iter().position(|&k| k == b.kind).unwrap())
            .collect()
    };
    let winner = tied
        .iter()
        .filter(|s| ones(s) == most)
        .min_by_key(|s| order(s))
        .map(|s| (*s).clone())
        .unwrap_or_default();
    (winner, tied.len() > 1)
}

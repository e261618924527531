//! Fast implementations checked against brute-force references on random
//! instances.

use corevad_core::clean::{clean_lrc, select_sources};
use corevad_core::evaluate::{auc_roc_raw, average_precision_raw};
use corevad_core::ingest::{EmbeddingBundle, Matrix};
use corevad_core::parse::ParsedResponses;
use corevad_core::refine::{context_weights, visual_semantic_refine, ContextMode};
use corevad_core::{cosine_similarity, CleaningResult};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

// Sum over distinct thresholds of (recall step) x precision at that threshold.
fn prefix_ap(scores: &[f64], labels: &[bool]) -> f64 {
    let positives = labels.iter().filter(|&&l| l).count() as f64;
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for t in thresholds {
        let predicted = scores.iter().filter(|&&s| s >= t).count() as f64;
        let hits = scores.iter().zip(labels).filter(|(&s, &l)| s >= t && l).count() as f64;
        let recall = hits / positives;
        ap += (recall - prev_recall) * hits / predicted;
        prev_recall = recall;
    }
    ap
}

fn random_instance(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<bool>) {
    let n = rng.random_range(2..=500);
    let quantized = rng.random_bool(0.5);
    let base_rate = rng.random_range(0.05..0.6);
    loop {
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(base_rate)).collect();
        if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
            continue;
        }
        let scores = labels
            .iter()
            .map(|&l| {
                let s = rng.random::<f64>() + if l { 0.3 } else { 0.0 };
                if quantized {
                    (s * 8.0).round() / 8.0
                } else {
                    s
                }
            })
            .collect();
        return (scores, labels);
    }
}

#[test]
fn auc_and_ap_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..200 {
        let (scores, labels) = random_instance(&mut rng);
        let auc = auc_roc_raw(&scores, &labels).unwrap();
        let ap = average_precision_raw(&scores, &labels).unwrap();
        assert!((auc - pairwise_auc(&scores, &labels)).abs() <= 1e-12, "case {case}");
        assert!((ap - prefix_ap(&scores, &labels)).abs() <= 1e-12, "case {case}");
    }
}

fn small_int_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let rows: Vec<Vec<f32>> = (0..rows)
        .map(|_| loop {
            let r: Vec<f32> = (0..cols).map(|_| rng.random_range(-2i32..=2) as f32).collect();
            if r.iter().any(|&x| x != 0.0) {
                break r;
            }
        })
        .collect();
    Matrix::from_rows(&rows).unwrap()
}

// Collect every maximiser, then apply the documented order: own segment,
// nearest, lower index.
fn exhaustive_choice(vision: &Matrix, responses: &Matrix, j: usize, l: usize) -> usize {
    let m = vision.rows();
    let lo = j.saturating_sub(l);
    let hi = (j + l).min(m - 1);
    let sims: Vec<(usize, f64)> = (lo..=hi)
        .map(|k| (k, cosine_similarity(vision.row(j), responses.row(k)).unwrap()))
        .collect();
    let best = sims.iter().map(|&(_, s)| s).fold(f64::NEG_INFINITY, f64::max);
    let mut tied: Vec<usize> = sims.iter().filter(|&&(_, s)| s == best).map(|&(k, _)| k).collect();
    tied.sort_by_key(|&k| (k != j, k.abs_diff(j), k));
    tied[0]
}

#[test]
fn lrc_matches_exhaustive_argmax() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut ties_seen = 0;
    for _ in 0..200 {
        let m = rng.random_range(1..=12);
        let l = rng.random_range(0..=3);
        let dim = rng.random_range(2..=4);
        let vision = small_int_matrix(&mut rng, m, dim);
        // Duplicated response rows force exact ties.
        let mut responses = small_int_matrix(&mut rng, m, dim);
        if m > 1 && rng.random_bool(0.5) {
            let rows: Vec<Vec<f32>> = (0..m).map(|k| responses.row(k % 2).to_vec()).collect();
            responses = Matrix::from_rows(&rows).unwrap();
            ties_seen += 1;
        }
        let selected = select_sources(&vision, &responses, Some(l));
        for j in 0..m {
            assert_eq!(
                selected[j],
                exhaustive_choice(&vision, &responses, j, l),
                "m={m} l={l} j={j}"
            );
        }
    }
    assert!(ties_seen > 50);
}

fn random_bundle(rng: &mut ChaCha8Rng, m: usize, dim: usize) -> EmbeddingBundle {
    let mut mat = || {
        let data: Vec<f32> = (0..m * dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        Matrix::from_vec(m, dim, data).unwrap()
    };
    let (v, r, d) = (mat(), mat(), mat());
    EmbeddingBundle::new("v", v, r, d).unwrap()
}

fn parsed(decisions: Vec<f64>) -> ParsedResponses {
    let descriptions = (0..decisions.len()).map(|i| format!("segment {i}")).collect();
    ParsedResponses {
        raw: Vec::new(),
        decisions,
        descriptions,
    }
}

#[test]
fn context_refine_approaches_argmax_as_tau_shrinks() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let m = rng.random_range(2..=20);
        let bundle = random_bundle(&mut rng, m, 8);
        let decisions: Vec<f64> = (0..m).map(|_| rng.random()).collect();
        let cleaned = clean_lrc(&parsed(decisions), &bundle, 1).unwrap();
        let rho = visual_semantic_refine(&cleaned, &bundle, 1e-6, ContextMode::Weighted).unwrap();
        for j in 0..m {
            let sims: Vec<f64> = cleaned
                .selected_index
                .iter()
                .map(|&k| cosine_similarity(bundle.vision().row(j), bundle.description_text().row(k)).unwrap())
                .collect();
            let best = (0..m).max_by(|&a, &b| sims[a].total_cmp(&sims[b])).unwrap();
            assert!((rho.values[j] - cleaned.decisions[best]).abs() <= 1e-6);
        }
    }
}

#[test]
fn context_weights_are_permutation_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let m = 9;
    let bundle = random_bundle(&mut rng, m, 6);
    let cleaned = CleaningResult {
        selected_index: (0..m).collect(),
        decisions: (0..m).map(|i| (i % 3) as f64 / 2.0).collect(),
        descriptions: vec![String::new(); m],
    };
    let order = [4, 0, 8, 2, 6, 1, 7, 3, 5];
    let permuted = CleaningResult {
        selected_index: (0..m).collect(),
        decisions: order.iter().map(|&i| cleaned.decisions[i]).collect(),
        descriptions: vec![String::new(); m],
    };
    let w = context_weights(&cleaned, &bundle, 0.05).unwrap();
    let wp = context_weights(&permuted, &bundle.permute_segments(&order), 0.05).unwrap();
    for a in 0..m {
        for b in 0..m {
            assert!((wp[a][b] - w[order[a]][order[b]]).abs() <= 1e-12);
        }
    }
}

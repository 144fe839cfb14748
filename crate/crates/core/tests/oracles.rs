//! Straight-line reimplementations checked against the library.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use replygraph_core::comment_only::{map_to_bins, CommentOnly, CommentOnlyConfig};
use replygraph_core::encoder::token_bucket;
use replygraph_core::eval::{stream_predict, EvalMetrics};
use replygraph_core::graphormer::{build_distance_matrix, Graphormer, GraphormerConfig};
use replygraph_core::training::{random_tree, step, OptimizerState, TrainConfig};
use replygraph_core::{encode, encode_graph, metrics, parse_thread, tokenize, DiscussionGraph, EncoderSpec, Horizon};
use replygraph_core::{Matrix, Model, ModelConfig, TrainedModel};

fn fixture(name: &str) -> DiscussionGraph {
    let path = format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    parse_thread(&std::fs::read(path).unwrap()).unwrap()
}

// ---- distances ----

fn floyd_warshall(g: &DiscussionGraph) -> Vec<Vec<usize>> {
    let n = g.len();
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for i in 0..n {
        d[i][i] = 0;
        if let Some(p) = g.parent(i) {
            d[i][p] = 1;
            d[p][i] = 1;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                d[i][j] = d[i][j].min(d[i][k] + d[k][j]);
            }
        }
    }
    d
}

#[test]
fn distances_match_all_pairs_shortest_paths() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let g = random_tree(rng.gen_range(1..30), &mut rng);
        let want = floyd_warshall(&g);
        let got = build_distance_matrix(&g, usize::MAX);
        let clamped = build_distance_matrix(&g, 3);
        for i in 0..g.len() {
            for j in 0..g.len() {
                assert_eq!(got.get(i, j), want[i][j]);
                assert_eq!(g.node_distance(i, j), want[i][j]);
                assert_eq!(clamped.get(i, j), want[i][j].min(3));
            }
        }
    }
}

#[test]
fn chain_fixture_distances() {
    let g = fixture("table1.json");
    assert_eq!(g.tree_distance("c0", "c6").unwrap(), 6);
    let d = build_distance_matrix(&g, 1);
    for i in 0..g.len() {
        for j in 0..g.len() {
            assert_eq!(d.get(i, j), usize::from(i != j));
        }
    }
}

// ---- hashed encoder ----

fn fnv_splitmix(token: &str, seed: u64) -> u64 {
    let mut bytes = seed.to_le_bytes().to_vec();
    bytes.extend_from_slice(token.as_bytes());
    let mut h: u64 = 14695981039346656037;
    for b in bytes {
        h = (h ^ b as u64).wrapping_mul(1099511628211);
    }
    let mut z = h;
    z = (z ^ (z >> 30)).wrapping_mul(13787848793156543929);
    z = (z ^ (z >> 27)).wrapping_mul(10723151780598845931);
    z ^ (z >> 31)
}

#[test]
fn hash_buckets_match_reference() {
    let spec = EncoderSpec::default();
    for token in ["topic", "b", "c", "they", "f*ck", "ünïcode", "42"] {
        let h = fnv_splitmix(token, spec.hash_seed);
        let sign = if h & (1 << 63) != 0 { -1.0 } else { 1.0 };
        assert_eq!(token_bucket(token, &spec), ((h % spec.dim as u64) as usize, sign), "{token}");
    }
}

#[test]
fn hash_buckets_frozen() {
    let spec = EncoderSpec::default();
    let got: Vec<(usize, f64)> = ["topic", "b", "c", "hello"].iter().map(|t| token_bucket(t, &spec)).collect();
    assert_eq!(got, FROZEN_BUCKETS);
}

const FROZEN_BUCKETS: [(usize, f64); 4] = [(62, 1.0), (58, -1.0), (24, 1.0), (46, 1.0)];

#[test]
fn encoding_is_normalized_signed_count() {
    let spec = EncoderSpec::default();
    let text = "They said: they, THEY and f*ck!";
    let mut want = vec![0.0; spec.dim];
    for t in tokenize(text) {
        let h = fnv_splitmix(&t, spec.hash_seed);
        want[(h % spec.dim as u64) as usize] += if h >> 63 == 1 { -1.0 } else { 1.0 };
    }
    let norm = want.iter().map(|x| x * x).sum::<f64>().sqrt();
    let got = encode(text, &spec);
    for (a, b) in got.iter().zip(&want) {
        assert!((a - b / norm).abs() < 1e-15);
    }
    assert_eq!(tokenize(text), ["they", "said", "they", "they", "and", "f*ck"]);
}

#[test]
fn topic_tokens_are_distinguishable() {
    let spec = EncoderSpec::default();
    assert_ne!(encode("x topic_b y", &spec), encode("x topic_c y", &spec));
}

// ---- graphormer ----

fn layer_norm(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    x.iter().map(|v| (v - mean) / (var + 1e-5).sqrt()).collect()
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + ((2.0 / std::f64::consts::PI).sqrt() * (x + 0.044715 * x.powi(3))).tanh())
}

fn affine(x: &[f64], w: &Matrix, b: Option<&Matrix>) -> Vec<f64> {
    (0..w.cols())
        .map(|c| {
            let s: f64 = x.iter().enumerate().map(|(r, v)| v * w.get(r, c)).sum();
            s + b.map_or(0.0, |b| b.get(0, c))
        })
        .collect()
}

fn graphormer_reference(m: &Graphormer, x: &Matrix, g: &DiscussionGraph) -> Vec<Vec<f64>> {
    let cfg = m.config();
    let p = |s: &str| m.params().tensor(s);
    let n = g.len();
    let d = cfg.model_dim;
    let hd = d / cfg.num_heads;
    let dist = floyd_warshall(g);
    let mut h: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = affine(x.row(i), p("input.weight"), Some(p("input.bias")));
            let din = usize::from(g.parent(i).is_some()).min(cfg.max_degree);
            let dout = g.children(i).len().min(cfg.max_degree);
            for c in 0..d {
                row[c] += p("centrality.in").get(din, c) + p("centrality.out").get(dout, c);
            }
            row
        })
        .collect();
    for l in 0..cfg.num_layers {
        let q = |s: &str| m.params().tensor(&format!("layer{l}.{s}"));
        let norm = |row: &[f64], which: &str| -> Vec<f64> {
            let gain = q(&format!("{which}.gain"));
            let off = q(&format!("{which}.offset"));
            layer_norm(row).iter().enumerate().map(|(c, v)| v * gain.get(0, c) + off.get(0, c)).collect()
        };
        let a: Vec<Vec<f64>> = h.iter().map(|r| norm(r, "ln1")).collect();
        let qs: Vec<Vec<f64>> = a.iter().map(|r| affine(r, q("attn.query"), None)).collect();
        let ks: Vec<Vec<f64>> = a.iter().map(|r| affine(r, q("attn.key"), None)).collect();
        let vs: Vec<Vec<f64>> = a.iter().map(|r| affine(r, q("attn.value"), None)).collect();
        let mut cat = vec![vec![0.0; d]; n];
        for head in 0..cfg.num_heads {
            let cols = head * hd..(head + 1) * hd;
            for i in 0..n {
                let scores: Vec<f64> = (0..n)
                    .map(|j| {
                        let dot: f64 = cols.clone().map(|c| qs[i][c] * ks[j][c]).sum();
                        dot / (hd as f64).sqrt() + p("spatial.bias").get(head, dist[i][j].min(cfg.max_distance))
                    })
                    .collect();
                let mx = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = scores.iter().map(|s| (s - mx).exp()).collect();
                let z: f64 = e.iter().sum();
                for c in cols.clone() {
                    cat[i][c] = (0..n).map(|j| e[j] / z * vs[j][c]).sum();
                }
            }
        }
        for i in 0..n {
            let o = affine(&cat[i], q("attn.output"), Some(q("attn.output_bias")));
            for c in 0..d {
                h[i][c] += o[c];
            }
            let b = norm(&h[i], "ln2");
            let f: Vec<f64> = affine(&b, q("ffn.w1"), Some(q("ffn.b1"))).into_iter().map(gelu).collect();
            let f = affine(&f, q("ffn.w2"), Some(q("ffn.b2")));
            for c in 0..d {
                h[i][c] += f[c];
            }
        }
    }
    h.iter().map(|r| affine(r, p("readout.weight"), Some(p("readout.bias")))).collect()
}

#[test]
fn graphormer_matches_straight_line_reference() {
    let cfg = GraphormerConfig {
        num_layers: 2,
        num_heads: 2,
        model_dim: 8,
        ffn_dim: 12,
        max_distance: 3,
        max_degree: 2,
        input_dim: 16,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let g = random_tree(rng.gen_range(1..9), &mut rng);
        let base = Graphormer::init(cfg, 1.0, &mut rng).unwrap();
        let m = Graphormer::new(cfg, base.params().random_like(0.5, &mut rng)).unwrap();
        let spec = EncoderSpec { dim: 16, ..EncoderSpec::default() };
        let x = encode_graph(&g, &spec).0;
        let got = m.forward_logits(&x, &build_distance_matrix(&g, usize::MAX), &g.degrees()).unwrap();
        let want = graphormer_reference(&m, &x, &g);
        for i in 0..g.len() {
            for c in 0..5 {
                assert!((got.get(i, c) - want[i][c]).abs() < 1e-10, "{} vs {}", got.get(i, c), want[i][c]);
            }
        }
    }
}

// ---- comment-only ----

#[test]
fn comment_score_matches_reference() {
    let cfg = CommentOnlyConfig { input_dim: 6, hidden_dim: 4 };
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let base = CommentOnly::init(cfg, 1.0, &mut rng).unwrap();
    let m = CommentOnly::new(cfg, base.params().random_like(1.0, &mut rng)).unwrap();
    let p = |s: &str| m.params().tensor(s);
    for _ in 0..20 {
        let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let hidden: Vec<f64> = affine(&x, p("hidden.weight"), Some(p("hidden.bias"))).into_iter().map(f64::tanh).collect();
        let z = affine(&hidden, p("output.weight"), Some(p("output.bias")))[0];
        let want = 1.0 / (1.0 + (-z).exp());
        assert!((m.comment_score(&x).unwrap() - want).abs() < 1e-12);
    }
}

#[test]
fn bin_edges() {
    let cases = [
        (0.0, 0),
        (0.1999999, 0),
        (0.2, 1),
        (0.3999999, 1),
        (0.4, 2),
        (0.6, 3),
        (0.7999999, 3),
        (0.8, 4),
        (1.0, 4),
    ];
    for (p, want) in cases {
        assert_eq!(map_to_bins(p).unwrap(), want, "{p}");
    }
    for bad in [-1e-9, 1.0 + 1e-9, f64::NAN, f64::INFINITY] {
        assert!(map_to_bins(bad).is_err());
    }
}

// ---- optimizer ----

#[test]
fn adam_matches_scalar_recurrence() {
    let cfg = ModelConfig::CommentOnly(CommentOnlyConfig { input_dim: 1, hidden_dim: 1 });
    let mut model = Model::init(&cfg, 1.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let config = TrainConfig {
        learning_rate: 0.1,
        ..TrainConfig::default()
    };
    let mut state = OptimizerState::new(config.optimizer, model.params());
    let x0 = model.params().tensor("hidden.weight").get(0, 0);
    let grads_seq = [0.5, -2.0, 0.25];
    let (mut x, mut m, mut v) = (x0, 0.0, 0.0);
    for (t, &gr) in grads_seq.iter().enumerate() {
        let mut g = model.params().zeros_like();
        g.get_mut("hidden.weight").unwrap().set(0, 0, gr);
        step(model.params_mut(), &g, &config, &mut state).unwrap();
        m = 0.9 * m + 0.1 * gr;
        v = 0.999 * v + 0.001 * gr * gr;
        let mh = m / (1.0 - 0.9f64.powi(t as i32 + 1));
        let vh = v / (1.0 - 0.999f64.powi(t as i32 + 1));
        x -= 0.1 * mh / (vh.sqrt() + 1e-8);
        assert!((model.params().tensor("hidden.weight").get(0, 0) - x).abs() < 1e-15);
    }
}

// ---- metrics ----

#[test]
fn hand_built_metrics() {
    // Six nodes, two right, errors of 1, 1, 2 and 4.
    let m = EvalMetrics::from_pairs([(0, 0), (1, 2), (2, 2), (3, 4), (4, 0), (2, 0)]);
    assert_eq!(m.total, 6);
    assert_eq!(m.correct, 2);
    assert!((m.accuracy - 1.0 / 3.0).abs() < 1e-15);
    assert!((m.mae - 8.0 / 6.0).abs() < 1e-15);
    assert_eq!(m.gold_counts, [1, 1, 2, 1, 1]);
    assert_eq!(m.predicted_counts, [3, 0, 2, 0, 1]);
    assert_eq!(m.confusion.iter().flatten().sum::<usize>(), 6);
}

#[test]
fn streaming_horizons_on_chain() {
    let g = fixture("table1.json");
    let spec = EncoderSpec::default();
    let cfg = ModelConfig::default_for(replygraph_core::ModelKind::Graphormer, spec.dim);
    let model = TrainedModel::new(Model::init(&cfg, 1.0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap(), spec).unwrap();
    let t = stream_predict(&model, &g, &spec).unwrap();
    assert_eq!(t.horizons, 6);
    let deepest = g.index_of("c6").unwrap();
    assert_eq!(t.nodes[deepest].steps.len(), 1);
    assert_eq!(t.nodes[g.index_of("c1").unwrap()].steps.len(), 6);
    assert_eq!(t.nodes[g.root()].steps.len(), 6);
    // Fixtures carry no labels, so any scored node is an error.
    let gold = g.gold_labels();
    assert!(metrics([(&t, gold.as_slice())], Horizon::Final).is_err());
    assert!(metrics([(&t, gold.as_slice())], Horizon::At(7)).unwrap().total == 0);
}

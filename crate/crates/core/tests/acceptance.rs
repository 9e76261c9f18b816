//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::Rng as _;

use groundmap::corpus_align::{em_train, extract_reference_dataset, generate_corpus, prepare, resolve, sample_known_model, EmConfig, NEARBY_RADIUS, NULL_OBJECT};
use groundmap::embed_metric::{
    kde_posterior, nway_retrieval_eval, train_embedder, triplet_loss, triplet_loss_and_grad, EmbeddingNet, KdeModel, LabeledPatch,
    Margins, TrainConfig, TripletBatch,
};
use groundmap::eval::{emd, run_episodes, success_rate, ExperimentConfig, PoolChoice, PredictorKind, Resources};
use groundmap::exemplar_db::{ImagePatch, ObjectDatabase, ObjectEntry};
use groundmap::geo_mapping::{project_mask, MapGeometry, Pose, ENV_EDGE, MAP_SIZE};
use groundmap::grounding::{combine, Grounder, ProposalConfig};
use groundmap::instruction_lang::{train_objref, Lexicon, ObjRefConfig};
use groundmap::sim_env::{
    build_exemplar_db, gen_ar_dataset, held_out_pool, render, synthetic_word_vectors, training_pool, DatasetConfig, Layout,
    PlacedObject, RenderConfig, ShapeKind,
};
use groundmap::util::{derive_seed, rng, Rng};

type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn within_budget(v: Verdict, elapsed: Duration, budget: Duration) -> Verdict {
    if elapsed > budget {
        verdict(false, format!("{} (over the {:?} budget)", v.detail, budget))
    } else {
        v
    }
}

fn rand_vec(r: &mut Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| r.random_range(lo..hi)).collect()
}

fn rand_dist(r: &mut Rng, n: usize) -> Vec<f64> {
    let v = rand_vec(r, n, 0.01, 1.0);
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

fn alignment_brute_force() -> Verdict {
    let start = Instant::now();
    let mut r = rng(101);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let (no, nb, nr) = (r.random_range(1..=3), r.random_range(1..=3), r.random_range(1..=3));
        let prior = rand_dist(&mut r, no);
        let box_prior = rand_vec(&mut r, nb, 0.0, 1.0);
        let p_o_b: Vec<Vec<f64>> = (0..nb).map(|_| rand_dist(&mut r, no)).collect();
        let p_o_r: Vec<Vec<f64>> = (0..nr).map(|_| rand_dist(&mut r, no)).collect();
        let got = combine(&box_prior, &p_o_b, &p_o_r, &prior).expect("combine");
        for b in 0..nb {
            for rr in 0..nr {
                let mut want = 0.0;
                for o in 0..no {
                    want += p_o_b[b][o] * box_prior[b] * p_o_r[rr][o] / prior[o];
                }
                worst = worst.max((got[b][rr] - want).abs());
            }
        }
    }
    within_budget(verdict(worst <= 1e-9, format!("max abs diff {worst:.2e}")), start.elapsed(), Duration::from_secs(1))
}

fn kde_db(ids: &[String]) -> ObjectDatabase {
    ObjectDatabase::new(
        ids.iter()
            .map(|id| ObjectEntry {
                id: id.clone(),
                images: vec![ImagePatch::zeros(32, 32, 3)],
                phrases: vec![vec![id.clone()]],
            })
            .collect(),
    )
    .expect("database")
}

fn kde_posterior_validity() -> Verdict {
    let mut r = rng(202);
    let mut worst_sum = 0.0f64;
    let mut asymmetric = 0usize;
    for _ in 0..1000 {
        let k = r.random_range(2..=6);
        let dim = r.random_range(1..=5);
        let sigma = r.random_range(0.3..3.0);
        let ids: Vec<String> = (0..k).map(|i| format!("o{i}")).collect();
        let objs: Vec<(String, Vec<Vec<f64>>)> = ids
            .iter()
            .map(|id| {
                let n = r.random_range(1..=4);
                (id.clone(), (0..n).map(|_| rand_vec(&mut r, dim, -3.0, 3.0)).collect())
            })
            .collect();
        let db = kde_db(&ids);
        let q = rand_vec(&mut r, dim, -3.0, 3.0);
        let p = kde_posterior(&KdeModel::new(sigma, objs).expect("model"), &db, &q).expect("posterior");
        worst_sum = worst_sum.max((p.probs.iter().sum::<f64>() - 1.0).abs());
        if p.probs.iter().any(|x| !(0.0..=1.0).contains(x)) {
            worst_sum = f64::INFINITY;
        }

        // Every object holds the same exemplars up to sign flips of the
        // coordinates, so each is equidistant from the origin query.
        let base: Vec<Vec<f64>> = (0..r.random_range(1..=4)).map(|_| rand_vec(&mut r, dim, -3.0, 3.0)).collect();
        let sym: Vec<(String, Vec<Vec<f64>>)> = ids
            .iter()
            .map(|id| {
                let flips: Vec<f64> = (0..dim).map(|_| if r.random_bool(0.5) { -1.0 } else { 1.0 }).collect();
                (id.clone(), base.iter().map(|e| e.iter().zip(&flips).map(|(x, f)| x * f).collect()).collect())
            })
            .collect();
        let p = kde_posterior(&KdeModel::new(sigma, sym).expect("model"), &db, &vec![0.0; dim]).expect("posterior");
        if p.probs.iter().any(|&x| x != 1.0 / k as f64) {
            asymmetric += 1;
        }
    }
    verdict(
        worst_sum <= 1e-9 && asymmetric == 0,
        format!("max |sum - 1| {worst_sum:.2e}, non-uniform symmetric cases {asymmetric}/1000"),
    )
}

const GC_SIDE: usize = 2;
const GC_INPUT: usize = GC_SIDE * GC_SIDE * 3;
const GC_HIDDEN: usize = 8;
const GC_OUT: usize = 4;
const KINK: f64 = 1e-3;

fn pre_activations(params: &[f64], x: &[f64]) -> Vec<f64> {
    let (w1, b1) = params.split_at(GC_HIDDEN * GC_INPUT);
    (0..GC_HIDDEN)
        .map(|h| b1[h] + w1[h * GC_INPUT..(h + 1) * GC_INPUT].iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
        .collect()
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Smallest and second-smallest squared distance from `a` to `set`.
fn two_nearest(a: &[f64], set: &[Vec<f64>]) -> (f64, f64) {
    let mut d: Vec<f64> = set.iter().map(|e| sq(a, e)).collect();
    d.sort_by(f64::total_cmp);
    (d[0], d.get(1).copied().unwrap_or(f64::INFINITY))
}

fn near_kink(net: &EmbeddingNet, anchor: &ImagePatch, pos: &[ImagePatch], neg: &[ImagePatch], m: Margins) -> bool {
    let all = std::iter::once(anchor).chain(pos).chain(neg);
    for p in all.clone() {
        if pre_activations(net.params(), p.as_slice()).iter().any(|z| z.abs() < KINK) {
            return true;
        }
    }
    let emb = |p: &ImagePatch| net.embed(p).expect("embed");
    let a = emb(anchor);
    let pe: Vec<Vec<f64>> = pos.iter().map(emb).collect();
    let ne: Vec<Vec<f64>> = neg.iter().map(emb).collect();
    let (s_a, s_a2) = two_nearest(&a, &pe);
    let (s_b, s_b2) = two_nearest(&a, &ne);
    let args = [s_a - m.m2, m.m2 - s_b, s_a - s_b + m.m1];
    s_a2 - s_a < KINK || s_b2 - s_b < KINK || args.iter().any(|x| x.abs() < KINK) || args.iter().all(|&x| x <= 0.0)
}

fn triplet_gradient_check() -> Verdict {
    let start = Instant::now();
    let m = Margins::default();
    let step = 1e-6;
    let mut worst = 0.0f64;
    let mut resampled = 0usize;
    for seed in 0..10u64 {
        let mut r = rng(derive_seed(303, seed));
        let (net, anchor, pos, neg) = loop {
            let net = EmbeddingNet::random(GC_INPUT, GC_HIDDEN, GC_OUT, r.random());
            let mut patch = |lo: f64, hi: f64| ImagePatch::new(GC_SIDE, GC_SIDE, 3, rand_vec(&mut r, GC_INPUT, lo, hi)).expect("patch");
            let anchor = patch(-1.0, 1.0);
            let pos: Vec<ImagePatch> = (0..3).map(|_| patch(-1.0, 1.0)).collect();
            let neg: Vec<ImagePatch> = (0..3).map(|_| patch(-2.0, 2.0)).collect();
            if !near_kink(&net, &anchor, &pos, &neg, m) {
                break (net, anchor, pos, neg);
            }
            resampled += 1;
        };
        let batch = |n: &EmbeddingNet| {
            triplet_loss(
                n,
                &TripletBatch {
                    anchor: &anchor,
                    positives: pos.iter().collect(),
                    negatives: neg.iter().collect(),
                    margins: m,
                },
            )
            .expect("loss")
        };
        let (_, grad) = triplet_loss_and_grad(
            &net,
            &TripletBatch {
                anchor: &anchor,
                positives: pos.iter().collect(),
                negatives: neg.iter().collect(),
                margins: m,
            },
        )
        .expect("gradient");
        let fd: Vec<f64> = (0..grad.len())
            .map(|i| {
                let mut plus = net.clone();
                plus.params_mut()[i] += step;
                let mut minus = net.clone();
                minus.params_mut()[i] -= step;
                (batch(&plus) - batch(&minus)) / (2.0 * step)
            })
            .collect();
        // Relative error of the whole gradient vector; coordinates that are
        // exactly zero analytically only carry finite-difference roundoff.
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = grad.iter().zip(&fd).map(|(g, f)| g - f).collect();
        worst = worst.max(norm(&diff) / norm(&grad).max(norm(&fd)));
    }
    within_budget(
        verdict(worst < 1e-4, format!("max relative error {worst:.2e}, {resampled} kink-adjacent draws resampled")),
        start.elapsed(),
        Duration::from_secs(10),
    )
}

fn trained_embedder() -> &'static EmbeddingNet {
    static NET: OnceLock<EmbeddingNet> = OnceLock::new();
    NET.get_or_init(|| {
        let ds = gen_ar_dataset(1, 200, &training_pool(), &DatasetConfig::default()).expect("dataset");
        let patches: Vec<ImagePatch> = ds.patches.iter().map(|p| p.patch.clone()).collect();
        train_embedder(&patches, &ds.triplets, &TrainConfig::default(), None).expect("training").net
    })
}

fn labeled(db: &ObjectDatabase) -> Vec<LabeledPatch> {
    db.entries()
        .iter()
        .flat_map(|e| {
            e.images.iter().map(|p| LabeledPatch {
                label: e.id.clone(),
                patch: p.clone(),
            })
        })
        .collect()
}

fn within_3_sigma(acc: f64, n: usize, trials: usize) -> bool {
    let p = 1.0 / n as f64;
    (acc - p).abs() <= 3.0 * (p * (1.0 - p) / trials as f64).sqrt()
}

fn retrieval() -> Verdict {
    let start = Instant::now();
    let trials = 500;
    let net = trained_embedder();
    let held = build_exemplar_db(&held_out_pool(), 10, 404, &DatasetConfig::default()).expect("held-out database");
    let pool = labeled(&held);
    let two = nway_retrieval_eval(net, &pool, 2, trials, 1).expect("2-way");
    let eight = nway_retrieval_eval(net, &pool, 8, trials, 2).expect("8-way");
    let zero = EmbeddingNet::zeros(net.input_dim(), net.hidden_dim(), net.output_dim());
    let c2 = nway_retrieval_eval(&zero, &pool, 2, trials, 3).expect("chance 2-way");
    let c8 = nway_retrieval_eval(&zero, &pool, 8, trials, 4).expect("chance 8-way");
    let chance = within_3_sigma(c2, 2, trials) && within_3_sigma(c8, 8, trials);
    within_budget(
        verdict(
            two >= 0.90 && eight >= 0.70 && chance,
            format!("2-way {two:.3}, 8-way {eight:.3}, untrained 2-way {c2:.3}, untrained 8-way {c8:.3}"),
        ),
        start.elapsed(),
        Duration::from_secs(120),
    )
}

fn projection_round_trip() -> Verdict {
    let geom = MapGeometry::new(MAP_SIZE, ENV_EDGE);
    let disk = held_out_pool().into_iter().find(|t| t.shape == ShapeKind::Disk).expect("a disk type");
    let half_fov = (42.0f64 - 10.0).to_radians();
    let mut r = rng(505);
    let (mut passed, mut placements) = (0usize, 0usize);
    let mut failures = Vec::new();
    while placements < 100 {
        let (x, y) = (r.random_range(0.3..ENV_EDGE - 0.3), r.random_range(0.3..ENV_EDGE - 0.3));
        let yaw = r.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let d = r.random_range(1.4..2.6);
        let bearing = yaw + r.random_range(-half_fov..half_fov);
        let (px, py) = (x + d * bearing.cos(), y + d * bearing.sin());
        if !(0.3..ENV_EDGE - 0.3).contains(&px) || !(0.3..ENV_EDGE - 0.3).contains(&py) {
            continue;
        }
        placements += 1;
        let mut layout = Layout::empty();
        layout.objects.push(PlacedObject::new(&disk, px, py, 0.2, 0.01, 0.0));
        let pose = Pose::ground(x, y, yaw);
        let scene = render(&layout, &pose, &RenderConfig::default(), placements as u64);
        let Some(ann) = scene.annotation_for(0) else {
            failures.push(format!("({px:.2}, {py:.2}) not rendered"));
            continue;
        };
        let proj = project_mask(&ann.mask, &pose, &geom).expect("projection");
        let (cx, cy) = geom.cell_of(px, py).expect("object inside the map");
        let max = proj.mask.data().iter().copied().fold(0.0, f64::max);
        if max > 0.0 && proj.mask.get(cx, cy) == max {
            passed += 1;
        } else {
            failures.push(format!("({px:.2}, {py:.2}) cell {:.3} max {max:.3}", proj.mask.get(cx, cy)));
        }
    }
    let extra = failures.first().map(|f| format!("; first failure {f}")).unwrap_or_default();
    verdict(passed == 100, format!("{passed}/100 placements peak in the object's cell{extra}"))
}

fn em_recovery() -> Verdict {
    let mut details = Vec::new();
    let mut pass = true;
    for seed in 0..5u64 {
        let km = sample_known_model(seed, 5, 40, 200, 0.05).expect("corpus");
        let rep = em_train(&km.instances, &EmConfig::default()).expect("em");
        let monotone = rep.log_likelihood.windows(2).all(|w| w[1] >= w[0] - 1e-9);
        let (mut hit, mut total) = (0usize, 0usize);
        for (inst, truth) in km.instances.iter().zip(&km.truth) {
            for (chunk, t) in inst.chunks.iter().zip(truth) {
                let want = t.as_deref().unwrap_or(NULL_OBJECT);
                hit += usize::from(resolve(&rep.model, chunk, &inst.candidates) == want);
                total += 1;
            }
        }
        let acc = hit as f64 / total as f64;
        pass &= monotone && acc >= 0.95;
        details.push(format!("seed {seed}: {acc:.3}{}", if monotone { "" } else { " (LL decreased)" }));
    }
    verdict(pass, details.join(", "))
}

fn oracle_closure() -> Verdict {
    let cfg = ExperimentConfig {
        predictor: PredictorKind::Oracle,
        episodes: 100,
        ..Default::default()
    };
    let out = run_episodes(&cfg, None).expect("episodes");
    let d: Vec<f64> = out.iter().map(|o| o.result.stop_distance).collect();
    let sr = success_rate(&d).expect("success rate");
    verdict(sr >= 0.95, format!("SR {sr:.3} over {} episodes", d.len()))
}

/// The full perception stack: trained embedder, held-out database, and an
/// object-reference classifier trained on EM-labeled corpus chunks.
fn pipeline_resources(cfg: &ExperimentConfig) -> Resources {
    let lexicon = Lexicon::builtin();
    let table = synthetic_word_vectors(&lexicon, cfg.word_vector_seed);
    let corpus = generate_corpus(606, 200, &training_pool(), &cfg.episode.layout).expect("corpus");
    let examples: Vec<_> = corpus.into_iter().map(|g| g.example).collect();
    let em = em_train(&prepare(&examples, &lexicon, NEARBY_RADIUS), &EmConfig::default()).expect("em");
    let labels = extract_reference_dataset(&examples, &em.model, &lexicon);
    let classifier = train_objref(&labels, &table, &ObjRefConfig::default()).expect("objref").classifier;
    let db = build_exemplar_db(&PoolChoice::HeldOut.types(), 8, 607, &DatasetConfig::default()).expect("database");
    Resources {
        grounder: Grounder::new(db, table, trained_embedder().clone()).expect("grounder"),
        lexicon,
        classifier,
    }
}

fn end_to_end() -> Verdict {
    let mut cfg = ExperimentConfig {
        predictor: PredictorKind::Heuristic,
        episodes: 50,
        pool: PoolChoice::HeldOut,
        ..Default::default()
    };
    let res = pipeline_resources(&cfg);
    let mut rates = Vec::new();
    for proposals in [ProposalConfig::noiseless(), ProposalConfig { jitter: 2.0, distractors: 1, ..ProposalConfig::default() }] {
        cfg.pipeline.proposals = proposals;
        let out = run_episodes(&cfg, Some(&res)).expect("episodes");
        let d: Vec<f64> = out.iter().map(|o| o.result.stop_distance).collect();
        rates.push(success_rate(&d).expect("success rate"));
    }
    let (clean, noisy) = (rates[0], rates[1]);
    verdict(
        clean >= 0.80 && clean - noisy <= 0.15,
        format!("noiseless SR {clean:.3}, jittered SR {noisy:.3}, drop {:.3}", clean - noisy),
    )
}

fn emd_properties() -> Verdict {
    let mut r = rng(909);
    let traj = |r: &mut Rng, n: usize| -> Vec<[f64; 2]> { (0..n).map(|_| [r.random_range(0.0..4.7), r.random_range(0.0..4.7)]).collect() };
    let (mut identity, mut translation, mut axioms) = (0.0f64, 0.0f64, 0usize);
    for _ in 0..20 {
        let n = r.random_range(2..8);
        let x = traj(&mut r, n);
        identity = identity.max(emd(&x, &x, 64).expect("emd"));
        let t = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
        let shifted: Vec<[f64; 2]> = x.iter().map(|p| [p[0] + t[0], p[1] + t[1]]).collect();
        translation = translation.max((emd(&x, &shifted, 64).expect("emd") - t[0].hypot(t[1])).abs());
        let (a, b, c) = (traj(&mut r, 5), traj(&mut r, 6), traj(&mut r, 7));
        let (ab, ba) = (emd(&a, &b, 16).expect("emd"), emd(&b, &a, 16).expect("emd"));
        let (bc, ac) = (emd(&b, &c, 16).expect("emd"), emd(&a, &c, 16).expect("emd"));
        if ab < 0.0 || (ab - ba).abs() > 1e-12 || ac > ab + bc + 1e-12 {
            axioms += 1;
        }
    }
    verdict(
        identity == 0.0 && translation <= 1e-9 && axioms == 0,
        format!("identity {identity:.1e}, translation error {translation:.2e}, axiom violations {axioms}/20"),
    )
}

const CLI_CONFIGS: [(&str, &str); 6] = [
    ("gen.json", r#"{"frames": 40, "corpus_size": 60, "exemplar_images": 4}"#),
    ("emb.json", r#"{"train": {"epochs": 1}, "trials": 50}"#),
    ("objref.json", r#"{"word_vectors": "data/word_vectors.txt", "objref": {"epochs": 5}}"#),
    (
        "exp.json",
        r#"{"predictor": "heuristic", "episodes": 3, "exemplar_images": 4, "database": "data/database.json",
            "embedder": "emb/embedder.json", "objref": "objref/objref.json", "word_vectors": "data/word_vectors.txt"}"#,
    ),
    (
        "ground.json",
        r#"{"experiment": {"database": "data/database.json", "embedder": "emb/embedder.json",
            "objref": "objref/objref.json", "word_vectors": "data/word_vectors.txt"}}"#,
    ),
    ("oracle.json", r#"{"episodes": 4}"#),
];

const CLI_RUNS: [&[&str]; 9] = [
    &["gen-data", "--config", "gen.json", "--out", "data"],
    &["train-embedder", "--data", "data/dataset", "--config", "emb.json", "--out", "emb"],
    &["align-corpus", "--corpus", "data/corpus.jsonl", "--out", "align"],
    &["train-objref", "--labels", "align/labels.jsonl", "--config", "objref.json", "--out", "objref"],
    &["ground", "--config", "ground.json", "--out", "ground"],
    &["rollout", "--config", "exp.json", "--out", "rollout"],
    &["eval", "--config", "exp.json", "--out", "eval"],
    &["eval", "--config", "oracle.json", "--seed", "7", "--out", "oracle"],
    &["report", "--results", "eval", "--out", "report"],
];

fn run_cli_chain(dir: &Path) -> Result<(), String> {
    for (name, body) in CLI_CONFIGS {
        std::fs::write(dir.join(name), body).map_err(|e| e.to_string())?;
    }
    for args in CLI_RUNS {
        let out = Command::new(env!("CARGO_BIN_EXE_groundmap"))
            .args(args)
            .current_dir(dir)
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("{} failed: {}", args[0], String::from_utf8_lossy(&out.stderr).trim()));
        }
    }
    Ok(())
}

fn files_under(root: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).expect("read dir") {
            let p = e.expect("dir entry").path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).expect("prefix").to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn cli_determinism() -> Verdict {
    let (a, b) = (tempfile::tempdir().expect("tempdir"), tempfile::tempdir().expect("tempdir"));
    for d in [a.path(), b.path()] {
        if let Err(e) = run_cli_chain(d) {
            return verdict(false, e);
        }
    }
    let (fa, fb) = (files_under(a.path()), files_under(b.path()));
    if fa != fb {
        return verdict(false, "the two runs wrote different file sets");
    }
    let differing: Vec<String> = fa
        .iter()
        .filter(|f| std::fs::read(a.path().join(f)).ok() != std::fs::read(b.path().join(f)).ok())
        .map(|f| f.display().to_string())
        .collect();
    verdict(
        differing.is_empty(),
        format!("{} subcommands, {} files compared, differing: {}", CLI_RUNS.len(), fa.len(), if differing.is_empty() { "none".to_string() } else { differing.join(", ") }),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("alignment score matches brute force", alignment_brute_force),
        ("KDE posterior validity", kde_posterior_validity),
        ("triplet loss gradient check", triplet_gradient_check),
        ("held-out N-way retrieval", retrieval),
        ("projection round trip", projection_round_trip),
        ("EM alignment recovery", em_recovery),
        ("oracle closure", oracle_closure),
        ("end-to-end grounding pipeline", end_to_end),
        ("EMD properties", emd_properties),
        ("CLI determinism", cli_determinism),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let total = Instant::now();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let t = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        failed += usize::from(!v.pass);
        println!(
            "criterion {n:>2} {}: {name}: {} [{:.1}s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {failed} failed, total {:.1}s", total.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}

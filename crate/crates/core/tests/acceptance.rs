//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Run all: `cargo test --release --test acceptance`.
//! Run a subset: `cargo test --release --test acceptance -- 2 3 8`.

use std::collections::HashMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use pastel::gpr::{anneal_weights, conflict_kl, conflict_weights, group_pagerank_on, GprMatrix};
use pastel::graph::{
    bfs_distances, generate_sbm, normalized_adjacency, sample_split, Graph, LabelSplit, SbmParams,
};
use pastel::metrics::{imbalance_summary, reaching_coefficient, ricci_curvature, squashing_coefficient, CurvatureMap};
use pastel::numerics::{finite_diff_check, Matrix};
use pastel::position::position_profile;
use pastel::seed;
use pastel::structure::FusionParams;
use pastel::trainer::{
    init_state, label_placement_study, pipeline_loss, pipeline_step, run_baseline,
    spearman, structure_report, train, BaselineKind, EpochInputs, TrainConfig,
};
use rand::Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn graph(n: usize, edges: &[(usize, usize)]) -> Graph {
    let e: Vec<_> = edges.iter().map(|&(u, v)| (u, v, 1.0)).collect();
    Graph::from_edges(n, &e, Matrix::zeros(n, 0)).expect("valid graph")
}

fn random_graph(n: usize, p: f64, dim: usize, rng: &mut impl Rng) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen::<f64>() < p {
                edges.push((u, v, 1.0));
            }
        }
    }
    let x = Matrix::from_fn(n, dim, |_, _| rng.gen_range(-1.0..1.0));
    Graph::from_edges(n, &edges, x).expect("valid graph")
}

fn is_connected(g: &Graph) -> bool {
    bfs_distances(g, 0).iter().all(|&d| d != pastel::graph::UNREACHABLE)
}

// ---------------------------------------------------------------- 1

fn gradient_gate() -> Outcome {
    let start = Instant::now();
    let mut rng = seed::stream(11, "acceptance/gradient");
    let g = loop {
        let g = random_graph(12, 0.3, 3, &mut rng);
        if is_connected(&g) {
            break g;
        }
    };
    let labels: Vec<Option<usize>> = (0..12).map(|v| Some(v % 2)).collect();
    let split = LabelSplit::from_anchors(labels, vec![vec![0, 2], vec![1, 5]]).map_err(|e| e.to_string())?;
    let x = g.features().clone();
    let norm_adj = normalized_adjacency(&g);
    let state = init_state(3, x.cols(), 5, 2, 2, 0.5).map_err(|e| e.to_string())?;
    let profile0 = position_profile(&g, &split).map_err(|e| e.to_string())?.standardized();
    // The current-structure profile differs from the original one.
    let mut a_prev = g.adjacency().clone();
    a_prev[(3, 9)] = 0.7;
    a_prev[(9, 3)] = 0.7;
    let profile = position_profile(&Graph::from_structure(&a_prev, Matrix::zeros(12, 0)).map_err(|e| e.to_string())?, &split)
        .map_err(|e| e.to_string())?
        .standardized();
    let z_prev = pastel::gnn::forward_eval(&state.gcn, &norm_adj, &x).map_err(|e| e.to_string())?.z;
    let gpr = group_pagerank_on(&a_prev, &split, 0.15).map_err(|e| e.to_string())?;
    let conflict = conflict_weights(&gpr);
    let labeled = split.labeled();
    let inputs = EpochInputs {
        x: &x,
        norm_adj: &norm_adj,
        profile: &profile,
        profile0: &profile0,
        z_prev: &z_prev,
        conflict_w: &conflict.w,
        labeled: &labeled,
        fusion: FusionParams {
            lambda1: 0.6,
            lambda2: 0.4,
            a0: 0.2,
        },
        betas: [0.5, -0.3, 0.1],
    };
    let dropout = || seed::stream(5, "acceptance/dropout");
    let step = pipeline_step(&state, &inputs, Some(&mut dropout())).map_err(|e| e.to_string())?;
    for (name, v) in [("smooth", step.terms.smooth), ("con", step.terms.con), ("spar", step.terms.spar)] {
        if v == 0.0 {
            return Err(format!("{name} term is zero; the check would not exercise it"));
        }
    }
    let kept = step.structure.a_star.data().iter().filter(|&&v| v != 0.0).count();
    let analytic: Vec<f64> = step.grads.iter().flat_map(|m| m.data().iter().copied()).collect();
    let params = state.flatten();
    let loss = |w: &[f64]| {
        let mut s = state.clone();
        s.set_flat(w);
        pipeline_loss(&s, &inputs, Some(&mut dropout())).expect("forward").total
    };
    let worst = finite_diff_check(loss, &params, &analytic);
    let elapsed = start.elapsed();
    check(
        worst <= 1e-4 && elapsed < Duration::from_secs(30),
        format!(
            "{} params, {kept} nonzero A* entries, max relative error {worst:.2e}, {elapsed:.2?}",
            params.len()
        ),
    )
}

// ---------------------------------------------------------------- 2

/// Mass unit for the lazy measures of graphs with at most 6 nodes: with
/// degree ≤ 5 every mass `½` or `½/d` is a whole multiple of `1/120`.
const UNIT: u32 = 120;

fn lazy_units(g: &Graph, v: usize) -> Vec<(usize, u32)> {
    let d = g.neighbors(v).len() as u32;
    let mut out = vec![(v, UNIT / 2)];
    out.extend(g.neighbors(v).iter().map(|&w| (w, UNIT / 2 / d)));
    out
}

/// Residual supplies and demands, seven bits per entry.
fn pack(a: &[u32], b: &[u32]) -> u128 {
    a.iter().chain(b).fold(0u128, |key, &x| key << 7 | x as u128)
}

/// Cheapest vertex of the transportation polytope. Every vertex is a tree
/// solution, and every tree has a leaf row or column that ships its whole
/// residual to one partner, so shipping `min(a_i, b_j)` along every possible
/// cell in every order visits all vertices (and only feasible plans); the
/// memo on residuals keeps it small.
fn vertex_min(a: &mut [u32], b: &mut [u32], cost: &[Vec<u32>], memo: &mut HashMap<u128, u32>) -> u32 {
    if a.iter().all(|&x| x == 0) {
        return 0;
    }
    let key = pack(a, b);
    if let Some(&v) = memo.get(&key) {
        return v;
    }
    let mut best = u32::MAX;
    for i in 0..a.len() {
        for j in 0..b.len() {
            let f = a[i].min(b[j]);
            if f == 0 {
                continue;
            }
            a[i] -= f;
            b[j] -= f;
            best = best.min(f * cost[i][j] + vertex_min(a, b, cost, memo));
            a[i] += f;
            b[j] += f;
        }
    }
    memo.insert(key, best);
    best
}

/// Transport problems already solved, keyed by supplies, demands and costs.
type OracleCache = HashMap<(Vec<u32>, Vec<u32>, Vec<Vec<u32>>), u32>;

fn oracle_curvature(g: &Graph, u: usize, v: usize, cache: &mut OracleCache) -> f64 {
    let mu = lazy_units(g, u);
    let nu = lazy_units(g, v);
    let dist: Vec<Vec<usize>> = (0..g.n()).map(|s| bfs_distances(g, s)).collect();
    let cost: Vec<Vec<u32>> = mu
        .iter()
        .map(|&(x, _)| nu.iter().map(|&(y, _)| dist[x][y] as u32).collect())
        .collect();
    // Reordering rows and columns leaves the optimum unchanged; sorting them
    // lets relabelled copies of the same local picture share a cache entry.
    let mut rows: Vec<(u32, Vec<u32>)> = mu.iter().map(|m| m.1).zip(cost).collect();
    rows.sort();
    let mut cols: Vec<(u32, Vec<u32>)> = nu
        .iter()
        .enumerate()
        .map(|(j, m)| (m.1, rows.iter().map(|r| r.1[j]).collect()))
        .collect();
    cols.sort();
    let a: Vec<u32> = rows.iter().map(|r| r.0).collect();
    let b: Vec<u32> = cols.iter().map(|c| c.0).collect();
    let cost: Vec<Vec<u32>> = (0..a.len()).map(|i| cols.iter().map(|c| c.1[i]).collect()).collect();
    let w = *cache.entry((a, b, cost)).or_insert_with_key(|(a, b, cost)| {
        vertex_min(&mut a.clone(), &mut b.clone(), cost, &mut HashMap::new())
    });
    1.0 - w as f64 / UNIT as f64
}

fn curvature_oracle() -> Outcome {
    let mut all = Vec::new();
    for n in 2..=6usize {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        for mask in 1u32..(1 << pairs.len()) {
            let edges: Vec<_> = pairs
                .iter()
                .enumerate()
                .filter(|(k, _)| mask >> k & 1 == 1)
                .map(|(_, &e)| e)
                .collect();
            let g = graph(n, &edges);
            if is_connected(&g) {
                all.push((g, edges));
            }
        }
    }
    let mut cache = OracleCache::new();
    let mut per_graph = Vec::new();
    for (g, edges) in &all {
        let mut worst = 0.0f64;
        for &(u, v) in edges {
            let got = ricci_curvature(g, u, v).map_err(|e| e.to_string())?;
            worst = worst.max((got - oracle_curvature(g, u, v, &mut cache)).abs());
        }
        per_graph.push((edges.len(), worst));
    }
    let edges_checked: usize = per_graph.iter().map(|p| p.0).sum();
    let worst = per_graph.iter().map(|p| p.1).fold(0.0, f64::max);
    check(
        worst <= 1e-9,
        format!(
            "{} connected graphs (all with n ≤ 6), {edges_checked} edges, max |Δκ| {worst:.2e}",
            all.len()
        ),
    )
}

// ---------------------------------------------------------------- 3

fn power_iteration(adj: &Matrix, split: &LabelSplit, alpha: f64) -> Matrix {
    let n = adj.rows();
    let c = split.num_classes();
    let deg: Vec<f64> = (0..n).map(|j| (0..n).filter(|&i| i != j).map(|i| adj[(i, j)]).sum()).collect();
    let mut teleport = Matrix::zeros(n, c);
    for k in 0..c {
        let set = split.anchors(k);
        for &a in set {
            teleport[(a, k)] = 1.0 / set.len() as f64;
        }
    }
    let mut x = teleport.scale(alpha);
    for _ in 0..5000 {
        let mut next = teleport.scale(alpha);
        for i in 0..n {
            for j in 0..n {
                if i != j && deg[j] > 0.0 && adj[(i, j)] != 0.0 {
                    let w = (1.0 - alpha) * adj[(i, j)] / deg[j];
                    for k in 0..c {
                        next[(i, k)] += w * x[(j, k)];
                    }
                }
            }
        }
        let delta = next.sub(&x).expect("same shape").max_abs();
        x = next;
        if delta < 1e-16 {
            break;
        }
    }
    x
}

fn gpr_power_iteration() -> Outcome {
    let mut rng = seed::stream(3, "acceptance/gpr");
    let mut worst = 0.0f64;
    let mut worst_col = 0.0f64;
    let mut sum_checked = 0;
    for _ in 0..50 {
        let n = rng.gen_range(4..=30);
        let c = rng.gen_range(1..=4usize);
        let g = random_graph(n, rng.gen_range(0.05..0.5), 0, &mut rng);
        let labels: Vec<Option<usize>> = (0..n).map(|v| Some(v % c)).collect();
        let anchors: Vec<Vec<usize>> = (0..c)
            .map(|k| {
                let members: Vec<usize> = (k..n).step_by(c).collect();
                let take = rng.gen_range(1..=members.len());
                members[..take].to_vec()
            })
            .collect();
        let split = LabelSplit::from_anchors(labels, anchors).map_err(|e| e.to_string())?;
        let alpha = rng.gen_range(0.05..0.5);
        let GprMatrix { values, .. } = group_pagerank_on(g.adjacency(), &split, alpha).map_err(|e| e.to_string())?;
        let oracle = power_iteration(g.adjacency(), &split, alpha);
        worst = worst.max(values.sub(&oracle).map_err(|e| e.to_string())?.max_abs());
        if (0..n).all(|v| !g.neighbors(v).is_empty()) {
            sum_checked += 1;
            for s in values.col_sums() {
                worst_col = worst_col.max((s - 1.0).abs());
            }
        }
    }
    check(
        worst <= 1e-8 && worst_col <= 1e-8 && sum_checked > 0,
        format!("50 graphs, max |P − power| {worst:.2e}; {sum_checked} without isolated nodes, max |colsum − 1| {worst_col:.2e}"),
    )
}

// ---------------------------------------------------------------- 4

fn reduces_to_gcn() -> Outcome {
    let mut params = SbmParams::new(120, 3, 0.15, 0.02);
    params.feature_noise = 2.0;
    let (g, labels) = generate_sbm(&params, 4).map_err(|e| e.to_string())?;
    let split = sample_split(&labels, 5, 4).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        epochs: 40,
        hidden: 32,
        seed: 4,
        lambda1: 1.0,
        beta1: 0.0,
        beta2: 0.0,
        beta3: 0.0,
        ..TrainConfig::default()
    };
    let pastel = train(&g, &split, &cfg).map_err(|e| e.to_string())?;
    let gcn = run_baseline(BaselineKind::PlainGcn, &g, &split, &cfg).map_err(|e| e.to_string())?;
    let a: Vec<f64> = pastel.records.iter().map(|r| r.test_wf1).collect();
    let b: Vec<f64> = gcn.records.iter().map(|r| r.test_wf1).collect();
    check(
        a == b && pastel.wf1 == gcn.wf1,
        format!("{} epochs, trajectories identical: {}, final W-F1 {:.4}", a.len(), a == b, pastel.wf1),
    )
}

// ---------------------------------------------------------------- 5 and 6

fn benchmark_config(seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        epochs: 60,
        hidden: 64,
        a0: 0.3,
        lambda1_floor: 0.5,
        per_class: 20,
        ..TrainConfig::default()
    }
}

struct SeedRun {
    gcn: f64,
    pastel: f64,
    rc: (f64, f64),
    sc: (f64, f64),
}

fn benchmark_runs() -> Result<(Vec<SeedRun>, Duration), String> {
    let start = Instant::now();
    let mut runs = Vec::new();
    for seed in 0..5 {
        let mut params = SbmParams::new(600, 4, 0.10, 0.005);
        params.feature_noise = 3.0;
        let (g, labels) = generate_sbm(&params, seed).map_err(|e| e.to_string())?;
        let cfg = benchmark_config(seed);
        let split = sample_split(&labels, cfg.per_class, seed).map_err(|e| e.to_string())?;
        let gcn = run_baseline(BaselineKind::PlainGcn, &g, &split, &cfg).map_err(|e| e.to_string())?;
        let out = train(&g, &split, &cfg).map_err(|e| e.to_string())?;
        let before = imbalance_summary(&g, &split).map_err(|e| e.to_string())?;
        let after = structure_report(&out.structure.a_star, &split).map_err(|e| e.to_string())?;
        runs.push(SeedRun {
            gcn: gcn.wf1,
            pastel: out.wf1,
            rc: (before.rc, after.rc),
            sc: (before.sc, after.sc),
        });
    }
    Ok((runs, start.elapsed()))
}

fn beats_gcn(runs: &[SeedRun], elapsed: Duration) -> Outcome {
    let gcn = runs.iter().map(|r| r.gcn).sum::<f64>() / runs.len() as f64;
    let ours = runs.iter().map(|r| r.pastel).sum::<f64>() / runs.len() as f64;
    let gap = 100.0 * (ours - gcn);
    check(
        gap >= 3.0 && elapsed < Duration::from_secs(600),
        format!("mean W-F1 GCN {:.2} vs PASTEL {:.2} ({gap:+.2} points), {elapsed:.1?} for 5 seeds", 100.0 * gcn, 100.0 * ours),
    )
}

fn improves_imbalance(runs: &[SeedRun]) -> Outcome {
    let good = runs.iter().filter(|r| r.rc.1 > r.rc.0 && r.sc.1 > r.sc.0).count();
    let detail: Vec<String> = runs
        .iter()
        .map(|r| format!("RC {:.3}→{:.3} SC {:.3}→{:.3}", r.rc.0, r.rc.1, r.sc.0, r.sc.1))
        .collect();
    check(good >= 4, format!("{good}/5 seeds improve both; {}", detail.join("; ")))
}

// ---------------------------------------------------------------- 7

fn label_placement() -> Outcome {
    let mut params = SbmParams::new(600, 4, 0.10, 0.005);
    params.feature_noise = 6.0;
    let (g, labels) = generate_sbm(&params, 0).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        seed: 0,
        epochs: 60,
        hidden: 64,
        per_class: 3,
        ..TrainConfig::default()
    };
    let recs = label_placement_study(&g, &labels, 10, &cfg).map_err(|e| e.to_string())?;
    let rc: Vec<f64> = recs.iter().map(|r| r.rc).collect();
    let sc: Vec<f64> = recs.iter().map(|r| r.sc).collect();
    let acc: Vec<f64> = recs.iter().map(|r| r.wf1).collect();
    let (rho_rc, rho_sc) = (spearman(&rc, &acc), spearman(&sc, &acc));
    let spread = 100.0 * (acc.iter().copied().fold(f64::MIN, f64::max) - acc.iter().copied().fold(f64::MAX, f64::min));
    check(
        rho_rc > 0.0 && rho_sc > 0.0 && spread >= 3.0,
        format!("ρ(RC, acc) {rho_rc:.3}, ρ(SC, acc) {rho_sc:.3}, accuracy spread {spread:.1} points"),
    )
}

// ---------------------------------------------------------------- 8

fn trivial_suites() -> Outcome {
    let e = |e: pastel::PastelError| e.to_string();
    let path = graph(3, &[(0, 1), (1, 2)]);
    // Node 2 is two hops (= D_G) from its only same-class anchor.
    let far = LabelSplit::from_anchors(vec![Some(0), Some(1), Some(0)], vec![vec![0], vec![1]]).map_err(e)?;
    // Node 1 is adjacent to its only same-class anchor.
    let near = LabelSplit::from_anchors(vec![Some(0), Some(0), Some(1)], vec![vec![0], vec![2]]).map_err(e)?;
    let rc0 = reaching_coefficient(&path, &far).map_err(e)?;
    let rc1 = reaching_coefficient(&path, &near).map_err(e)?;

    let edge = graph(2, &[(0, 1)]);
    let one = LabelSplit::from_anchors(vec![Some(0), Some(0)], vec![vec![0]]).map_err(e)?;
    let sc = squashing_coefficient(&edge, &one, &CurvatureMap::compute(&edge).map_err(e)?).map_err(e)?;

    let kl = Matrix::from_fn(100, 100, |i, j| (i * 100 + j) as f64);
    let w = anneal_weights(&kl);
    let (first, mid, last) = (w[(99, 99)], w[(49, 99)], w[(0, 0)]);
    let anneal_ok = first < 1e-3 && (mid - 0.5).abs() < 1e-3 && last > 1.0 - 1e-3;

    let mut rng = seed::stream(8, "acceptance/kl");
    let p = GprMatrix {
        values: Matrix::from_fn(5, 3, |_, _| rng.gen_range(0.0..1.0)),
        alpha: 0.15,
    };
    let mut dup = p.clone();
    dup.values = Matrix::from_fn(6, 3, |i, j| p.values[(i % 5, j)]);
    let self_kl = conflict_kl(&dup, 0, 5).map_err(e)?;

    check(
        rc0.abs() < 1e-12 && (rc1 - 1.0).abs() < 1e-12 && (sc - 1.0).abs() < 1e-12 && anneal_ok && self_kl.abs() < 1e-12,
        format!(
            "RC endpoints {rc0}, {rc1}; SC(single edge) {sc}; anneal {first:.2e}, {mid:.4}, {last:.6}; KL(p‖p) {self_kl:.1e}"
        ),
    )
}

// ---------------------------------------------------------------- 9

fn pastel(args: &[&str], cwd: &Path) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_pastel"))
        .args(args)
        .current_dir(cwd)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("pastel {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)))
    }
}

fn same_tree(a: &Path, b: &Path) -> Result<usize, String> {
    let mut names: Vec<_> = std::fs::read_dir(a)
        .map_err(|e| e.to_string())?
        .map(|e| e.map(|e| e.file_name()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    names.sort();
    for name in &names {
        let x = std::fs::read(a.join(name)).map_err(|e| e.to_string())?;
        let y = std::fs::read(b.join(name)).map_err(|e| e.to_string())?;
        if x != y {
            return Err(format!("{} differs after rerun", a.join(name).display()));
        }
    }
    Ok(names.len())
}

fn manifest_reruns() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("gen", vec!["sbm-gen", "--n", "90", "--c", "3", "--p", "0.2", "--q", "0.02", "--seed", "2", "--out", "gen"]),
        ("diag", vec!["diagnose", "--graph", "gen", "--per-class", "4", "--out", "diag"]),
        (
            "train",
            vec![
                "train", "--graph", "gen", "--epochs", "15", "--hidden", "16", "--per-class", "4",
                "--dump-structure", "a_star.edges", "--dump-gpr", "gpr.csv", "--out", "train",
            ],
        ),
        ("base", vec!["train", "--sbm", "n=90,c=3,p=0.2,q=0.02", "--baseline", "add_edge:0.1", "--epochs", "10", "--hidden", "8", "--out", "base"]),
        ("study", vec!["study", "--mode", "labels", "--graph", "gen", "--trials", "3", "--epochs", "8", "--hidden", "8", "--per-class", "3", "--out", "study"]),
        ("sweep", vec!["study", "--mode", "structures", "--sbm", "n=90,c=3,p=0.2,q=0.02", "--qs", "0.02,0.06", "--epochs", "8", "--hidden", "8", "--out", "sweep"]),
    ];
    let mut files = 0;
    for (name, args) in &runs {
        pastel(args, d)?;
        let again = format!("{name}-again");
        pastel(&["rerun", "--manifest", &format!("{name}/manifest.json"), "--out", &again], d)?;
        files += same_tree(&d.join(name), &d.join(&again))?;
    }
    Ok(format!("{} commands rerun from their manifests, {files} files byte-identical", runs.len()))
}

fn main() {
    let wanted: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let on = |k: &str| wanted.is_empty() || wanted.iter().any(|w| w == k);
    let mut results: Vec<(&str, &str, Outcome)> = Vec::new();
    let mut run = |id: &'static str, name: &'static str, f: &dyn Fn() -> Outcome| {
        if on(id) {
            let r = f();
            println!("criterion {id} [{}] {name}: {}", if r.is_ok() { "PASS" } else { "FAIL" }, r.as_ref().unwrap_or_else(|e| e));
            results.push((id, name, r));
        }
    };
    run("1", "full-pipeline gradient check", &gradient_gate);
    run("2", "curvature vs transport-vertex enumeration", &curvature_oracle);
    run("3", "Group PageRank vs power iteration", &gpr_power_iteration);
    run("4", "λ1 = 1, β = 0 reproduces plain GCN", &reduces_to_gcn);
    if on("5") || on("6") {
        match benchmark_runs() {
            Ok((runs, elapsed)) => {
                run("5", "SBM(600, 4) W-F1 gain over GCN", &|| beats_gcn(&runs, elapsed));
                run("6", "learned structure raises RC and SC", &|| improves_imbalance(&runs));
            }
            Err(e) => {
                run("5", "SBM(600, 4) W-F1 gain over GCN", &|| Err(e.clone()));
                run("6", "learned structure raises RC and SC", &|| Err(e.clone()));
            }
        }
    }
    run("7", "label placement study correlations", &label_placement);
    run("8", "trivial suites", &trivial_suites);
    run("9", "manifest reruns are byte-identical", &manifest_reruns);
    let failed = results.iter().filter(|r| r.2.is_err()).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

use std::path::Path;

use paretogen::config::ExperimentConfig;
use paretogen::oracle::make_synthetic;
use paretogen::pipeline::{cmd_generate, histogram_for_model, load_generator, load_run, CostSource};
use paretogen::space::enumerate;

#[test]
#[ignore]
fn probe_reference_run() {
    let dir = Path::new("/tmp/refrun");
    let (cfg, _, state) = load_run(dir).unwrap();
    let space = cfg.search_space().unwrap();
    let (cm, qo) = match cfg.oracle {
        paretogen::config::OracleDecl::Synthetic { seed, tradeoff } => {
            make_synthetic(&space, seed, tradeoff).unwrap()
        }
        _ => unreachable!(),
    };
    let all: Vec<(f64, f64)> = enumerate(&space, 1 << 21)
        .unwrap()
        .map(|a| (cm.cost(&a), qo.quality(&a).unwrap()))
        .collect();
    println!("enumerated {}", all.len());
    for (i, &b) in state.budgets.iter().enumerate() {
        let mut feas: Vec<f64> =
            all.iter().filter(|(c, _)| *c <= b).map(|&(_, q)| q).collect();
        feas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let top1 = feas[((feas.len() as f64) * 0.99) as usize - 1];
        let top5 = feas[((feas.len() as f64) * 0.95) as usize - 1];
        match cmd_generate(dir, b, None) {
            Ok(rep) => {
                let rank = feas.iter().filter(|&&q| q > rep.quality).count();
                println!(
                    "budget {i}: B={b:.2} feas={} top1%={top1:.4} top5%={top5:.4} got q={:.4} c={:.2} worse_than={} frac_better={:.4} feas_rate={:.2} wall={:.0}ms",
                    feas.len(), rep.quality, rep.cost, rank,
                    rank as f64 / feas.len() as f64, rep.feasibility_rate, rep.wall_ms
                );
            }
            Err(e) => println!("budget {i}: B={b:.2} feas={} ERROR {e}", feas.len()),
        }
    }
    // off-grid midpoints
    for i in 0..5 {
        let b = 0.5 * (state.budgets[2 * i] + state.budgets[2 * i + 1]);
        let mut feas: Vec<f64> =
            all.iter().filter(|(c, _)| *c <= b).map(|&(_, q)| q).collect();
        feas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        match cmd_generate(dir, b, None) {
            Ok(rep) => println!(
                "midpoint {i}: B={b:.2} got q={:.4} c={:.2} frac_better={:.4}",
                rep.quality,
                rep.cost,
                feas.iter().filter(|&&q| q > rep.quality).count() as f64 / feas.len() as f64
            ),
            Err(e) => println!("midpoint {i}: B={b:.2} ERROR {e}"),
        }
    }
    // histogram feasibility at each grid budget
    let (model, _) = load_generator(dir, &cfg, &state).unwrap();
    let cost = CostSource::Additive(cm.clone());
    for (i, &b) in state.budgets.iter().enumerate() {
        let (rep, _) = histogram_for_model(&model, &cost, &space, b, 1000, 1234 + i as u64);
        println!(
            "hist {i}: B={b:.2} feas={:.3} uniform={:.3}",
            rep.feasibility, rep.uniform_feasibility
        );
    }
}

#[test]
#[ignore]
fn probe_evaluator_boundary() {
    use paretogen::frontier::brute_force_optimum;
    use paretogen::pipeline::load_evaluator;
    let dir = Path::new("/tmp/refrun");
    let (cfg, _, state) = load_run(dir).unwrap();
    let space = cfg.search_space().unwrap();
    let (cm, qo) = match cfg.oracle {
        paretogen::config::OracleDecl::Synthetic { seed, tradeoff } => {
            make_synthetic(&space, seed, tradeoff).unwrap()
        }
        _ => unreachable!(),
    };
    let ev = load_evaluator(dir, &cfg, &state).unwrap();
    let b0 = state.budgets[0];
    let opt = brute_force_optimum(&space, &cm, &qo, b0).unwrap();
    let near_miss = paretogen::space::Architecture::new(vec![1, 0, 1, 1, 0, 1, 3, 2]);
    // cheapest arch overall
    let mut cheapest = None;
    for a in enumerate(&space, 1 << 21).unwrap() {
        let c = cm.cost(&a);
        if cheapest.as_ref().map_or(true, |(cc, _)| c < *cc) {
            cheapest = Some((c, a));
        }
    }
    let (cmin, amin) = cheapest.unwrap();
    for (label, a) in [("optimum", &opt.arch), ("near_miss", &near_miss), ("cheapest", &amin)] {
        let (r, _) = ev.evaluate(a, b0).unwrap();
        println!(
            "{label}: cost={:.2} q={:.4} R={r:.3}",
            cm.cost(a),
            qo.quality(a).unwrap()
        );
    }
    println!("min cost = {cmin:.2}, budget0 = {b0:.2}");
    // score profile along costs at budget0: 30 random feasible + 30 infeasible nearby
    let all: Vec<_> = enumerate(&space, 1 << 21).unwrap().collect();
    let mut scored: Vec<(f64, f64)> = all
        .iter()
        .filter(|a| (cm.cost(a) - b0).abs() < 3.0)
        .take(4000)
        .map(|a| (cm.cost(a), ev.evaluate(a, b0).unwrap().0))
        .collect();
    scored.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    for chunk in scored.chunks(scored.len() / 10) {
        let mc: f64 = chunk.iter().map(|x| x.0).sum::<f64>() / chunk.len() as f64;
        let mr: f64 = chunk.iter().map(|x| x.1).sum::<f64>() / chunk.len() as f64;
        println!("cost~{mc:.2} meanR={mr:.3} n={}", chunk.len());
    }
}

#[test]
#[ignore]
fn probe_longer_evaluator() {
    use paretogen::evaluator::{train_evaluator, DominanceRule};
    use paretogen::generator::build_grid;
    use paretogen::oracle::estimate_cost_range;
    use paretogen::pipeline::{build_oracle, gather_records, phase_seed};
    let dir = Path::new("/tmp/refrun");
    let (cfg, _, _) = load_run(dir).unwrap();
    let bundle = build_oracle(&cfg).unwrap();
    let records = gather_records(&cfg, &bundle).unwrap();
    let range = estimate_cost_range(&records, cfg.lo_percentile, cfg.hi_percentile).unwrap();
    let grid = build_grid(&range, cfg.k, cfg.d_b, phase_seed(cfg.seed, 2)).unwrap();
    let mut ecfg = cfg.evaluator.to_config(DominanceRule::Full);
    ecfg.max_iters = 16000;
    ecfg.patience = 3000;
    ecfg.tol = 0.0;
    let t0 = std::time::Instant::now();
    let trained = train_evaluator(&records, &grid, &bundle.space, &ecfg, phase_seed(cfg.seed, 3)).unwrap();
    println!("trained in {:.0}s, holdout={:.4}, iters={}", t0.elapsed().as_secs_f64(), trained.holdout_agreement, trained.log.last().unwrap().iter);
    let cm = bundle.cost.as_additive().unwrap();
    let b0 = grid.budgets()[0];
    let all: Vec<_> = enumerate(&bundle.space, 1 << 21).unwrap().collect();
    let mut scored: Vec<(f64, f64)> = all
        .iter()
        .filter(|a| (cm.cost(a) - b0).abs() < 3.0)
        .take(4000)
        .map(|a| (cm.cost(a), trained.model.evaluate(a, b0).unwrap().0))
        .collect();
    scored.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    for chunk in scored.chunks(scored.len() / 10) {
        let mc: f64 = chunk.iter().map(|x| x.0).sum::<f64>() / chunk.len() as f64;
        let mr: f64 = chunk.iter().map(|x| x.1).sum::<f64>() / chunk.len() as f64;
        println!("cost~{mc:.2} meanR={mr:.3} n={}", chunk.len());
    }
}

#[test]
#[ignore]
fn probe_argmax_long_eval() {
    use paretogen::evaluator::{train_evaluator, DominanceRule};
    use paretogen::generator::build_grid;
    use paretogen::oracle::estimate_cost_range;
    use paretogen::pipeline::{build_oracle, gather_records, phase_seed};
    let dir = Path::new("/tmp/refrun");
    let (cfg, _, _) = load_run(dir).unwrap();
    let bundle = build_oracle(&cfg).unwrap();
    let records = gather_records(&cfg, &bundle).unwrap();
    let range = estimate_cost_range(&records, cfg.lo_percentile, cfg.hi_percentile).unwrap();
    let grid = build_grid(&range, cfg.k, cfg.d_b, phase_seed(cfg.seed, 2)).unwrap();
    let mut ecfg = cfg.evaluator.to_config(DominanceRule::Full);
    ecfg.max_iters = 16000;
    ecfg.patience = 3000;
    ecfg.tol = 0.0;
    let trained = train_evaluator(&records, &grid, &bundle.space, &ecfg, phase_seed(cfg.seed, 3)).unwrap();
    let cm = bundle.cost.as_additive().unwrap();
    let qo = &bundle.quality;
    let all: Vec<_> = enumerate(&bundle.space, 1 << 21).unwrap().collect();
    for bi in [0usize, 1, 2] {
        let b = grid.budgets()[bi];
        let mut scored: Vec<(f64, f64, f64)> = all
            .iter()
            .map(|a| (trained.model.evaluate(a, b).unwrap().0, cm.cost(a), qo.quality(a).unwrap()))
            .collect();
        scored.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
        let feas_top20 = scored[..20].iter().filter(|t| t.1 <= b).count();
        println!("budget {bi} B={b:.2}: top20 feasible {feas_top20}/20");
        for t in &scored[..5] {
            println!("  R={:.3} c={:.2} q={:.4} feas={}", t.0, t.1, t.2, t.1 <= b);
        }
    }
}

#[test]
#[ignore]
fn probe_stronger_entropy() {
    use paretogen::generator::{train_generator, GeneratorModel, build_grid, InferConfig, infer};
    use paretogen::pipeline::{build_oracle, evaluator_reward, load_evaluator, phase_seed};
    let dir = Path::new("/tmp/refrun");
    let (cfg, _, state) = load_run(dir).unwrap();
    let bundle = build_oracle(&cfg).unwrap();
    let ev = load_evaluator(dir, &cfg, &state).unwrap();
    let grid = build_grid(&state.cost_range, cfg.k, cfg.d_b, phase_seed(cfg.seed, 2)).unwrap();
    let mut gcfg = cfg.generator.to_config();
    gcfg.lambda = 0.08; // emulate sum-of-entropies at lambda 0.01
    let mut model = GeneratorModel::new(bundle.space.clone(), Some(&grid), &gcfg, phase_seed(cfg.seed, 4));
    {
        let mut reward = evaluator_reward(&ev);
        train_generator(&mut model, &mut reward, &gcfg, phase_seed(cfg.seed, 5)).unwrap();
    }
    let cm = bundle.cost.as_additive().unwrap().clone();
    let qo = &bundle.quality;
    let all: Vec<(f64, f64)> = enumerate(&bundle.space, 1 << 21)
        .unwrap()
        .map(|a| (cm.cost(&a), qo.quality(&a).unwrap()))
        .collect();
    let icfg = InferConfig::default();
    for (i, &b) in grid.budgets().iter().enumerate() {
        let (traces, _) = model.sample_policy(b, 999 + i as u64, 1000);
        let feas_rate =
            traces.iter().filter(|t| cm.cost(&t.arch) <= b).count() as f64 / 1000.0;
        let mut feas: Vec<f64> = all.iter().filter(|(c, _)| *c <= b).map(|&(_, q)| q).collect();
        feas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        match infer(&model, b, &|a| cm.cost(a), Some(qo), None, &icfg, 777 + i as u64) {
            Ok(rep) => {
                let worse = feas.iter().filter(|&&q| q > rep.selection_score).count();
                println!(
                    "budget {i}: B={b:.2} feas_rate={feas_rate:.3} sel_q={:.4} frac_better={:.4}",
                    rep.selection_score,
                    worse as f64 / feas.len() as f64
                );
            }
            Err(e) => println!("budget {i}: B={b:.2} feas_rate={feas_rate:.3} ERROR {e}"),
        }
    }
    // off-grid midpoints
    for i in 0..5 {
        let b = 0.5 * (grid.budgets()[2 * i] + grid.budgets()[2 * i + 1]);
        let mut feas: Vec<f64> = all.iter().filter(|(c, _)| *c <= b).map(|&(_, q)| q).collect();
        feas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        match infer(&model, b, &|a| cm.cost(a), Some(qo), None, &icfg, 555 + i as u64) {
            Ok(rep) => println!(
                "midpoint {i}: B={b:.2} frac_better={:.4}",
                feas.iter().filter(|&&q| q > rep.selection_score).count() as f64
                    / feas.len() as f64
            ),
            Err(e) => println!("midpoint {i}: ERROR {e}"),
        }
    }
}

#[test]
#[ignore]
fn probe_budget0_landscape() {
    use paretogen::generator::{build_grid, train_generator, GeneratorModel};
    use paretogen::pipeline::{build_oracle, evaluator_reward, load_evaluator, load_generator, phase_seed};
    let dir = Path::new("/tmp/refrun");
    let (cfg, _, state) = load_run(dir).unwrap();
    let bundle = build_oracle(&cfg).unwrap();
    let ev = load_evaluator(dir, &cfg, &state).unwrap();
    let (model, grid) = load_generator(dir, &cfg, &state).unwrap();
    let cm = bundle.cost.as_additive().unwrap().clone();
    let b0 = grid.budgets()[0];
    let b1 = grid.budgets()[1];
    for (label, b) in [("b0", b0), ("b1", b1)] {
        let (traces, _) = model.sample_policy(b, 31, 1000);
        let costs: Vec<f64> = traces.iter().map(|t| cm.cost(&t.arch)).collect();
        let mc = costs.iter().sum::<f64>() / 1000.0;
        let mn = costs.iter().cloned().fold(f64::INFINITY, f64::min);
        let mx = costs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mean_r: f64 = traces.iter().map(|t| ev.evaluate(&t.arch, b).unwrap().0).sum::<f64>() / 1000.0;
        let ent: f64 = traces.iter().map(|t| t.entropies.iter().sum::<f64>() / 8.0).sum::<f64>() / 1000.0;
        println!("{label}: B={b:.2} mean_cost={mc:.2} min={mn:.2} max={mx:.2} meanR={mean_r:.3} mean_step_entropy={ent:.4}");
    }
    // what reward do the truly feasible archs get at b0?
    let all: Vec<_> = enumerate(&bundle.space, 1 << 21).unwrap().collect();
    let mut feas_r: Vec<f64> = all
        .iter()
        .filter(|a| cm.cost(a) <= b0)
        .map(|a| ev.evaluate(a, b0).unwrap().0)
        .collect();
    feas_r.sort_by(|a, b| b.partial_cmp(a).unwrap());
    println!(
        "feasible at b0: n={} bestR={:.3} medianR={:.3}",
        feas_r.len(),
        feas_r[0],
        feas_r[feas_r.len() / 2]
    );
    // does the policy's mode arch beat them per the evaluator?
    let (traces, _) = model.sample_policy(b0, 77, 50);
    let mut best = f64::NEG_INFINITY;
    for t in &traces {
        best = best.max(ev.evaluate(&t.arch, b0).unwrap().0);
    }
    println!("policy-sample best R at b0: {best:.3}");
}

#[test]
#[ignore]
fn probe_gen_hparams() {
    use paretogen::generator::{build_grid, infer, train_generator, GeneratorModel, InferConfig};
    use paretogen::pipeline::{build_oracle, evaluator_reward, load_evaluator, phase_seed};
    let lambda: f64 = std::env::var("L").unwrap().parse().unwrap();
    let lr: f64 = std::env::var("LR").unwrap().parse().unwrap();
    let dir = Path::new("/tmp/refrun");
    let (cfg, _, state) = load_run(dir).unwrap();
    let bundle = build_oracle(&cfg).unwrap();
    let ev = load_evaluator(dir, &cfg, &state).unwrap();
    let grid = build_grid(&state.cost_range, cfg.k, cfg.d_b, phase_seed(cfg.seed, 2)).unwrap();
    let mut gcfg = cfg.generator.to_config();
    gcfg.lambda = lambda;
    gcfg.lr = lr;
    let mut model = GeneratorModel::new(bundle.space.clone(), Some(&grid), &gcfg, phase_seed(cfg.seed, 4));
    {
        let mut reward = evaluator_reward(&ev);
        train_generator(&mut model, &mut reward, &gcfg, phase_seed(cfg.seed, 5)).unwrap();
    }
    let cm = bundle.cost.as_additive().unwrap().clone();
    let qo = &bundle.quality;
    let all: Vec<(f64, f64)> = enumerate(&bundle.space, 1 << 21)
        .unwrap()
        .map(|a| (cm.cost(&a), qo.quality(&a).unwrap()))
        .collect();
    let icfg = InferConfig::default();
    println!("lambda={lambda} lr={lr}");
    let mut budgets: Vec<f64> = grid.budgets().to_vec();
    for i in 0..5 {
        budgets.push(0.5 * (grid.budgets()[2 * i] + grid.budgets()[2 * i + 1]));
    }
    for (i, &b) in budgets.iter().enumerate() {
        let (traces, _) = model.sample_policy(b, 999 + i as u64, 1000);
        let feas_rate = traces.iter().filter(|t| cm.cost(&t.arch) <= b).count() as f64 / 1000.0;
        let mut feas: Vec<f64> = all.iter().filter(|(c, _)| *c <= b).map(|&(_, q)| q).collect();
        feas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        match infer(&model, b, &|a| cm.cost(a), Some(qo), None, &icfg, 777 + i as u64) {
            Ok(rep) => println!(
                "b[{i}]={b:.2} feas_rate={feas_rate:.3} frac_better={:.4}",
                feas.iter().filter(|&&q| q > rep.selection_score).count() as f64 / feas.len() as f64
            ),
            Err(e) => println!("b[{i}]={b:.2} feas_rate={feas_rate:.3} ERROR {e}"),
        }
    }
}

#[test]
#[ignore]
fn probe_eval_sweep() {
    use paretogen::evaluator::{train_evaluator, DominanceRule};
    use paretogen::generator::build_grid;
    use paretogen::oracle::estimate_cost_range;
    use paretogen::pipeline::{build_oracle, gather_records, phase_seed};
    let iters: usize = std::env::var("EI").unwrap().parse().unwrap();
    let pat: usize = std::env::var("EP").unwrap().parse().unwrap();
    let elr: f64 = std::env::var("ELR").unwrap().parse().unwrap();
    let dir = Path::new("/tmp/refrun");
    let (cfg, _, _) = load_run(dir).unwrap();
    let bundle = build_oracle(&cfg).unwrap();
    let records = gather_records(&cfg, &bundle).unwrap();
    let range = estimate_cost_range(&records, cfg.lo_percentile, cfg.hi_percentile).unwrap();
    let grid = build_grid(&range, cfg.k, cfg.d_b, phase_seed(cfg.seed, 2)).unwrap();
    let mut ecfg = cfg.evaluator.to_config(DominanceRule::Full);
    ecfg.max_iters = iters;
    ecfg.patience = pat;
    ecfg.lr = elr;
    ecfg.tol = 0.0;
    let t0 = std::time::Instant::now();
    let trained =
        train_evaluator(&records, &grid, &bundle.space, &ecfg, phase_seed(cfg.seed, 3)).unwrap();
    println!(
        "iters={} lr={elr} took {:.0}s holdout={:.4} stop_iter={}",
        iters,
        t0.elapsed().as_secs_f64(),
        trained.holdout_agreement,
        trained.log.last().unwrap().iter
    );
    let cm = bundle.cost.as_additive().unwrap();
    let b0 = grid.budgets()[0];
    // fraction of top-50 R-ranked archs that are feasible at b0, plus peak sharpness
    let all: Vec<_> = enumerate(&bundle.space, 1 << 21).unwrap().collect();
    let mut scored: Vec<(f64, f64)> = all
        .iter()
        .map(|a| (trained.model.evaluate(a, b0).unwrap().0, cm.cost(a)))
        .collect();
    scored.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
    for topn in [20usize, 50, 200] {
        let f = scored[..topn].iter().filter(|t| t.1 <= b0).count();
        println!("top{topn} feasible at b0: {f}/{topn}");
    }
    trained.model.params.save(Path::new("/tmp/eval_sweep.ck")).unwrap();
}

#[test]
#[ignore]
fn probe_rtop() {
    use paretogen::evaluator::{train_evaluator, DominanceRule};
    use paretogen::generator::build_grid;
    use paretogen::oracle::estimate_cost_range;
    use paretogen::pipeline::{build_oracle, gather_records, phase_seed};
    let seed: u64 = std::env::var("SEED").map(|v| v.parse().unwrap()).unwrap_or(1);
    let ei: usize = std::env::var("EI").map(|v| v.parse().unwrap()).unwrap_or(32000);
    let dir = Path::new("/tmp/refrun");
    let (mut cfg, _, _) = load_run(dir).unwrap();
    cfg.seed = seed;
    let bundle = build_oracle(&cfg).unwrap();
    let records = gather_records(&cfg, &bundle).unwrap();
    let range = estimate_cost_range(&records, cfg.lo_percentile, cfg.hi_percentile).unwrap();
    let grid = build_grid(&range, cfg.k, cfg.d_b, phase_seed(cfg.seed, 2)).unwrap();
    let mut ecfg = cfg.evaluator.to_config(DominanceRule::Full);
    ecfg.max_iters = ei;
    ecfg.patience = 3000;
    ecfg.tol = 1e-5;
    let cache = std::path::PathBuf::from(format!(
        "/tmp/evcache-s{seed}-ei{ei}-elr{}-lrf{}.ck", ecfg.lr, ecfg.lr_final
    ));
    let ev = if cache.exists() {
        let mut m = paretogen::evaluator::EvaluatorModel::new(
            bundle.space.clone(), &grid, &ecfg, phase_seed(cfg.seed, 3) ^ 0xABCD_EF01,
        );
        let loaded = paretogen::diffcore::ParamStore::load(&cache, 0).unwrap();
        let names: Vec<String> = m.params.names().map(str::to_string).collect();
        for name in names {
            let s = loaded.get(&name).data.clone();
            m.params.get_mut(&name).data.copy_from_slice(&s);
        }
        println!("seed={seed} EI={ei} cached");
        m
    } else {
        let trained = train_evaluator(&records, &grid, &bundle.space, &ecfg, phase_seed(cfg.seed, 3)).unwrap();
        trained.model.params.save(&cache).unwrap();
        println!("seed={seed} EI={ei} holdout={:.4}", trained.holdout_agreement);
        trained.model
    };
    let cm = bundle.cost.as_additive().unwrap();
    let qo = &bundle.quality;
    for bi in 0..4usize {
        let b = grid.budgets()[bi];
        let mut feas: Vec<(f64, f64)> = enumerate(&bundle.space, 1 << 21)
            .unwrap()
            .filter(|a| cm.cost(a) <= b)
            .map(|a| (ev.evaluate(&a, b).unwrap().0, qo.quality(&a).unwrap()))
            .collect();
        let n = feas.len();
        let cut = ((n as f64 * 0.01) as usize).max(0);
        let mut by_q: Vec<f64> = feas.iter().map(|t| t.1).collect();
        by_q.sort_by(|a, b| b.partial_cmp(a).unwrap());
        feas.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        let mut row = format!("b[{bi}]={b:.2} n={n} cut_rank={cut}:");
        for m in [1usize, 5, 10, 20, 50, 100] {
            let best = feas[..m.min(n)]
                .iter()
                .map(|t| by_q.iter().filter(|&&q| q > t.1).count())
                .min()
                .unwrap();
            row.push_str(&format!(" top{m}->qr{best}"));
        }
        println!("{row}");
    }
}

#[test]
#[ignore]
fn probe_uncond() {
    use paretogen::evaluator::DominanceRule;
    use paretogen::frontier::{independent_search, IndependentSearchConfig};
    use paretogen::generator::build_grid;
    use paretogen::oracle::estimate_cost_range;
    use paretogen::pipeline::{build_oracle, gather_records, phase_seed};
    let seed: u64 = std::env::var("SEED").map(|v| v.parse().unwrap()).unwrap_or(2);
    let ei: usize = std::env::var("EI").map(|v| v.parse().unwrap()).unwrap_or(32000);
    let dir = Path::new("/tmp/refrun");
    let (mut cfg, _, _) = load_run(dir).unwrap();
    cfg.seed = seed;
    let bundle = build_oracle(&cfg).unwrap();
    let records = gather_records(&cfg, &bundle).unwrap();
    let range = estimate_cost_range(&records, cfg.lo_percentile, cfg.hi_percentile).unwrap();
    let grid = build_grid(&range, cfg.k, cfg.d_b, phase_seed(cfg.seed, 2)).unwrap();
    let ecfg = {
        let mut e = cfg.evaluator.to_config(DominanceRule::Full);
        e.max_iters = ei;
        e.patience = 3000;
        e.tol = 1e-5;
        e
    };
    let cache = std::path::PathBuf::from(format!(
        "/tmp/evcache-s{seed}-ei{ei}-elr{}-lrf{}.ck", ecfg.lr, ecfg.lr_final
    ));
    assert!(cache.exists(), "run probe_rtop or probe_end_to_end first to cache");
    let mut ev = paretogen::evaluator::EvaluatorModel::new(
        bundle.space.clone(), &grid, &ecfg, phase_seed(cfg.seed, 3) ^ 0xABCD_EF01,
    );
    let loaded = paretogen::diffcore::ParamStore::load(&cache, 0).unwrap();
    let names: Vec<String> = ev.params.names().map(str::to_string).collect();
    for name in names {
        let s = loaded.get(&name).data.clone();
        ev.params.get_mut(&name).data.copy_from_slice(&s);
    }
    let cm = bundle.cost.as_additive().unwrap();
    let qo = &bundle.quality;
    let icfg = IndependentSearchConfig { generator: cfg.generator.to_config(), final_samples: 500 };
    for bi in 0..3usize {
        let b = grid.budgets()[bi];
        let mut reward = paretogen::pipeline::evaluator_reward(&ev);
        let out = independent_search(&bundle.space, cm, qo, b, &mut reward, &icfg, phase_seed(cfg.seed, 8 + bi as u64)).unwrap();
        let mut feas: Vec<f64> = enumerate(&bundle.space, 1 << 21)
            .unwrap()
            .filter(|a| cm.cost(a) <= b)
            .map(|a| qo.quality(&a).unwrap())
            .collect();
        feas.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let fb = feas.iter().filter(|&&q| q > out.best.quality).count() as f64 / feas.len() as f64;
        println!(
            "b[{bi}]={b:.2} uncond fb={fb:.4} feas_rate={:.3} mean_cost={:.2}",
            out.feasibility_rate, out.mean_cost
        );
    }
}

#[test]
#[ignore]
fn probe_b0_eval_quality_rank() {
    use paretogen::pipeline::load_evaluator;
    let dir = Path::new("/tmp/refrun");
    let (cfg, _, state) = load_run(dir).unwrap();
    let space = cfg.search_space().unwrap();
    let (cm, qo) = match cfg.oracle {
        paretogen::config::OracleDecl::Synthetic { seed, tradeoff } => {
            make_synthetic(&space, seed, tradeoff).unwrap()
        }
        _ => unreachable!(),
    };
    let ev = load_evaluator(dir, &cfg, &state).unwrap();
    for bi in [0usize, 1] {
        let b = state.budgets[bi];
        // all feasible archs, ranked by evaluator score; report oracle-quality rank
        let mut feas: Vec<(f64, f64, f64)> = enumerate(&space, 1 << 21)
            .unwrap()
            .filter(|a| cm.cost(a) <= b)
            .map(|a| (ev.evaluate(&a, b).unwrap().0, qo.quality(&a).unwrap(), cm.cost(&a)))
            .collect();
        let n = feas.len();
        let mut by_q: Vec<f64> = feas.iter().map(|t| t.1).collect();
        by_q.sort_by(|a, b| b.partial_cmp(a).unwrap());
        feas.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        println!("budget {bi}: B={b:.2} n_feas={n} top1%_cut={:.4}", by_q[(n as f64 * 0.01) as usize]);
        for t in &feas[..8] {
            let qrank = by_q.iter().filter(|&&q| q > t.1).count();
            println!("  R={:.3} q={:.4} c={:.2} quality_rank={}/{}", t.0, t.1, t.2, qrank, n);
        }
    }
}

#[test]
#[ignore]
fn probe_b0_global_top() {
    use paretogen::pipeline::load_evaluator;
    let dir = Path::new("/tmp/refrun");
    let (cfg, _, state) = load_run(dir).unwrap();
    let space = cfg.search_space().unwrap();
    let (cm, qo) = match cfg.oracle {
        paretogen::config::OracleDecl::Synthetic { seed, tradeoff } => {
            make_synthetic(&space, seed, tradeoff).unwrap()
        }
        _ => unreachable!(),
    };
    let ev = load_evaluator(dir, &cfg, &state).unwrap();
    let b = state.budgets[0];
    let mut all: Vec<(f64, f64, f64)> = enumerate(&space, 1 << 21)
        .unwrap()
        .map(|a| (ev.evaluate(&a, b).unwrap().0, cm.cost(&a), qo.quality(&a).unwrap()))
        .collect();
    all.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
    for t in &all[..15] {
        println!("R={:.3} c={:.2} q={:.4} feas={}", t.0, t.1, t.2, t.1 <= b);
    }
}

#[test]
#[ignore]
fn probe_end_to_end() {
    use paretogen::evaluator::{train_evaluator, DominanceRule};
    use paretogen::generator::{build_grid, infer, train_generator, GeneratorModel, InferConfig};
    use paretogen::oracle::estimate_cost_range;
    use paretogen::pipeline::{build_oracle, gather_records, phase_seed};
    let seed: u64 = std::env::var("SEED").map(|v| v.parse().unwrap()).unwrap_or(1);
    let ei: usize = std::env::var("EI").map(|v| v.parse().unwrap()).unwrap_or(16000);
    let elr: f64 = std::env::var("ELR").map(|v| v.parse().unwrap()).unwrap_or(1e-3);
    let dir = Path::new("/tmp/refrun");
    let (mut cfg, _, _) = load_run(dir).unwrap();
    cfg.seed = seed;
    let bundle = build_oracle(&cfg).unwrap();
    let records = gather_records(&cfg, &bundle).unwrap();
    let range = estimate_cost_range(&records, cfg.lo_percentile, cfg.hi_percentile).unwrap();
    let grid = build_grid(&range, cfg.k, cfg.d_b, phase_seed(cfg.seed, 2)).unwrap();
    let mut ecfg = cfg.evaluator.to_config(DominanceRule::Full);
    ecfg.max_iters = ei;
    ecfg.patience = 3000;
    ecfg.lr = elr;
    ecfg.lr_final = std::env::var("LRF").map(|v| v.parse().unwrap()).unwrap_or(1e-4);
    ecfg.tol = 1e-5;
    let cache = std::path::PathBuf::from(format!(
        "/tmp/evcache-s{seed}-ei{ei}-elr{elr}-lrf{}.ck", ecfg.lr_final
    ));
    let ev_model = if cache.exists() {
        let mut m = paretogen::evaluator::EvaluatorModel::new(
            bundle.space.clone(), &grid, &ecfg, phase_seed(cfg.seed, 3) ^ 0xABCD_EF01,
        );
        let loaded = paretogen::diffcore::ParamStore::load(&cache, 0).unwrap();
        let names: Vec<String> = m.params.names().map(str::to_string).collect();
        for name in names {
            let s = loaded.get(&name).data.clone();
            m.params.get_mut(&name).data.copy_from_slice(&s);
        }
        println!("seed={seed} EI={ei} ELR={elr} LRF={} holdout=cached", ecfg.lr_final);
        m
    } else {
        let trained = train_evaluator(&records, &grid, &bundle.space, &ecfg, phase_seed(cfg.seed, 3)).unwrap();
        trained.model.params.save(&cache).unwrap();
        println!("seed={seed} EI={ei} ELR={elr} LRF={} holdout={:.4}", ecfg.lr_final, trained.holdout_agreement);
        trained.model
    };
    let ev = &ev_model;
    let cm = bundle.cost.as_additive().unwrap().clone();
    let qo = &bundle.quality;
    let all: Vec<(f64, f64)> = enumerate(&bundle.space, 1 << 21)
        .unwrap()
        .map(|a| (cm.cost(&a), qo.quality(&a).unwrap()))
        .collect();
    let mut gcfg = cfg.generator.to_config();
    if let Ok(v) = std::env::var("GLRL") { gcfg.lr_late = v.parse().unwrap(); }
    if let Ok(v) = std::env::var("GLR") { gcfg.lr = v.parse().unwrap(); }
    let mut model = GeneratorModel::new(bundle.space.clone(), Some(&grid), &gcfg, phase_seed(cfg.seed, 4));
    {
        let mut reward = paretogen::pipeline::evaluator_reward(ev);
        train_generator(&mut model, &mut reward, &gcfg, phase_seed(cfg.seed, 5)).unwrap();
    }
    let icfg = InferConfig::default();
    let mut budgets: Vec<f64> = grid.budgets().to_vec();
    for i in 0..5 {
        budgets.push(0.5 * (grid.budgets()[2 * i] + grid.budgets()[2 * i + 1]));
    }
    for (i, &b) in budgets.iter().enumerate() {
        let (traces, _) = model.sample_policy(b, 999 + i as u64, 1000);
        let feas_rate = traces.iter().filter(|t| cm.cost(&t.arch) <= b).count() as f64 / 1000.0;
        let mut feas: Vec<f64> = all.iter().filter(|(c, _)| *c <= b).map(|&(_, q)| q).collect();
        feas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // best R-rank (among feasible archs) the policy's samples reach
        let rrank = if i < 3 {
            let mut rs: Vec<f64> = enumerate(&bundle.space, 1 << 21)
                .unwrap()
                .filter(|a| cm.cost(a) <= b)
                .map(|a| ev.evaluate(&a, b).unwrap().0)
                .collect();
            rs.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let best_r = traces
                .iter()
                .filter(|t| cm.cost(&t.arch) <= b)
                .map(|t| ev.evaluate(&t.arch, b).unwrap().0)
                .fold(f64::NEG_INFINITY, f64::max);
            format!(" best_sample_Rrank={}", rs.iter().filter(|&&r| r > best_r).count())
        } else {
            String::new()
        };
        match infer(&model, b, &|a| cm.cost(a), Some(qo), None, &icfg, phase_seed(cfg.seed, 6) ^ b.to_bits()) {
            Ok(rep) => println!(
                "b[{i}]={b:.2} feas_rate={feas_rate:.3} frac_better={:.4} n_feas={}{rrank}",
                feas.iter().filter(|&&q| q > rep.selection_score).count() as f64 / feas.len() as f64,
                feas.len()
            ),
            Err(e) => println!("b[{i}]={b:.2} feas_rate={feas_rate:.3} ERROR {e}{rrank}"),
        }
    }
}

#[test]
#[ignore]
fn probe_grad_kinks() {
    use paretogen::diffcore::check::{fd_grad_param, rel_error};
    use paretogen::evaluator::{dominance as dom, ranking_loss, ranking_loss_grads, EvaluatorConfig, EvaluatorModel, RankedPair};
    use paretogen::generator::{build_grid, GeneratorConfig, GeneratorModel};
    use paretogen::oracle::{CostRange, ScoredRecord};
    use paretogen::space::{Architecture, SearchSpace};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = SearchSpace::from_cardinalities(&[3, 3]).unwrap();
        let grid = build_grid(&CostRange { lo: 10.0, hi: 20.0 }, 2, 4, seed).unwrap();
        let ecfg = EvaluatorConfig { hidden: (8, 6), ..Default::default() };
        let mut emodel = EvaluatorModel::new(space.clone(), &grid, &ecfg, seed ^ 0xE0);
        let recs: Vec<ScoredRecord> = (0..4)
            .map(|_| ScoredRecord {
                arch: Architecture::new(vec![rng.gen_range(0..3), rng.gen_range(0..3)]),
                cost: rng.gen_range(8.0..22.0),
                quality: rng.gen_range(0.05..0.95),
            })
            .collect();
        let mut pairs = Vec::new();
        for i in 0..recs.len() {
            for j in 0..recs.len() {
                for k in 0..2 {
                    if i != j {
                        let d = dom(&recs[i], &recs[j], grid.budgets()[k]);
                        if d != 0 { pairs.push(RankedPair { i, j, budget_idx: k, verdict: d }); }
                    }
                }
            }
        }
        emodel.params.zero_grads();
        ranking_loss_grads(&mut emodel, &recs, &pairs).unwrap();
        let eview = emodel.with_params(emodel.params.clone());
        let names: Vec<String> = emodel.params.names().map(str::to_string).collect();
        let mut eworst: f64 = 0.0; let mut ename = String::new();
        for name in &names {
            let ad = emodel.params.get(name).grad.clone();
            let fd = fd_grad_param(&mut emodel.params, name, |s| ranking_loss(&eview.with_params(s.clone()), &recs, &pairs).unwrap());
            let e = rel_error(&ad, &fd);
            if e > eworst { eworst = e; ename = name.clone(); }
        }
        // hinge margins
        let zs: Vec<f64> = pairs.iter().map(|p| {
            let ri = eview.evaluate(&recs[p.i].arch, grid.budgets()[p.budget_idx]).unwrap().0;
            let rj = eview.evaluate(&recs[p.j].arch, grid.budgets()[p.budget_idx]).unwrap().0;
            p.verdict as f64 * (ri - rj)
        }).collect();
        let min_margin = zs.iter().map(|z| (z - 1.0).abs()).fold(f64::INFINITY, f64::min);
        let mut rng2 = ChaCha8Rng::seed_from_u64(seed);
        let gspace = SearchSpace::from_cardinalities(&[3, 4]).unwrap();
        let gcfg = GeneratorConfig { d_h: 6, token_dim: 4, ..Default::default() };
        let mut gmodel = GeneratorModel::new(gspace, Some(&grid), &gcfg, seed ^ 0xA0);
        let budget = 14.0 + seed as f64 * 0.2;
        let (traces, cache) = gmodel.forward_batch(budget, 3, None, &mut rng2);
        let archs: Vec<Architecture> = traces.iter().map(|t| t.arch.clone()).collect();
        let advantages = vec![0.8, -0.4, 0.3];
        gmodel.params.zero_grads();
        gmodel.accumulate_batch_grads(&cache, &advantages, 0.05, 1.0);
        let gview = gmodel.with_params(gmodel.params.clone());
        let gnames: Vec<String> = gmodel.params.names().map(str::to_string).collect();
        let mut gworst: f64 = 0.0; let mut gname = String::new();
        for name in &gnames {
            let ad = gmodel.params.get(name).grad.clone();
            let fd = fd_grad_param(&mut gmodel.params, name, |s| gview.with_params(s.clone()).surrogate_loss(budget, &archs, &advantages, 0.05));
            let e = rel_error(&ad, &fd);
            if e > gworst { gworst = e; gname = name.clone(); }
        }
        println!("seed {seed}: eval worst {eworst:.2e} ({ename}) min|z-1|={min_margin:.4}  gen worst {gworst:.2e} ({gname})");
    }
}

#[test]
#[ignore]
fn probe_eval_landscape() {
    use paretogen::evaluator::{train_evaluator, DominanceRule};
    use paretogen::generator::build_grid;
    use paretogen::oracle::estimate_cost_range;
    use paretogen::pipeline::{build_oracle, gather_records, phase_seed};
    let seed: u64 = std::env::var("SEED").map(|v| v.parse().unwrap()).unwrap_or(1);
    let ei: usize = std::env::var("EI").map(|v| v.parse().unwrap()).unwrap_or(16000);
    let dir = Path::new("/tmp/refrun");
    let (mut cfg, _, _) = load_run(dir).unwrap();
    cfg.seed = seed;
    let bundle = build_oracle(&cfg).unwrap();
    let records = gather_records(&cfg, &bundle).unwrap();
    let range = estimate_cost_range(&records, cfg.lo_percentile, cfg.hi_percentile).unwrap();
    let grid = build_grid(&range, cfg.k, cfg.d_b, phase_seed(cfg.seed, 2)).unwrap();
    let mut ecfg = cfg.evaluator.to_config(DominanceRule::Full);
    ecfg.max_iters = ei;
    ecfg.patience = ei;
    ecfg.tol = 1e-5;
    let t0 = std::time::Instant::now();
    let trained = train_evaluator(&records, &grid, &bundle.space, &ecfg, phase_seed(cfg.seed, 3)).unwrap();
    println!(
        "seed={seed} EI={ei} took {:.0}s holdout={:.4} stop_iter={}",
        t0.elapsed().as_secs_f64(),
        trained.holdout_agreement,
        trained.log.last().unwrap().iter
    );
    let ev = &trained.model;
    let cm = bundle.cost.as_additive().unwrap();
    let qo = &bundle.quality;
    println!("final_loss_ma={:.5}", {
        let rows: Vec<f64> = trained.log.iter().rev().take(10).map(|r| r.loss).collect();
        rows.iter().sum::<f64>() / rows.len() as f64
    });
    for bi in [0usize, 1, 2] {
        let b = grid.budgets()[bi];
        let mut all: Vec<(f64, f64, f64)> = enumerate(&bundle.space, 1 << 21)
            .unwrap()
            .map(|a| (ev.evaluate(&a, b).unwrap().0, cm.cost(&a), qo.quality(&a).unwrap()))
            .collect();
        let mut feas_q: Vec<f64> = all.iter().filter(|t| t.1 <= b).map(|t| t.2).collect();
        feas_q.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let n = feas_q.len();
        all.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
        println!("b[{bi}]={b:.2} n_feas={n} top1%cut_rank={}", n / 100);
        for t in &all[..5] {
            let qrank = feas_q.iter().filter(|&&q| q > t.2).count();
            println!("  global R={:.3} c={:.2} q={:.4} feas={} qrank={qrank}/{n}", t.0, t.1, t.2, t.1 <= b);
        }
        let mut count = 0;
        for t in &all {
            if t.1 <= b {
                let qrank = feas_q.iter().filter(|&&q| q > t.2).count();
                println!("  feastop R={:.3} c={:.2} q={:.4} qrank={qrank}/{n}", t.0, t.1, t.2);
                count += 1;
                if count == 5 { break; }
            }
        }
    }
}

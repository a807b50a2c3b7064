//! One function per subcommand. Each reads the config, runs the pipeline stage
//! and records values, verdicts and report files in the shared [`Report`].

use anyhow::{bail, Result};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sparse_radon::analysis::{graded_flow, log_range, map_improving_region, modulus_exponent, pairs_at, random_smooth, spike_family};
use sparse_radon::decomposition::{cz_decompose, dyadic_maximal, whitney};
use sparse_radon::geometry::models;
use sparse_radon::operators::{CZKernel, KernelLadder};
use sparse_radon::sparse::{
    domination_check, random_block_pair, smallest_whitney_constant, starting_cube, support_constants, verify_sparse, whitney_constant, SelectParams,
    Selector, WhitneyRule,
};
use sparse_radon::weights::{a_p_constant, weighted_norm_check, Weight};
use sparse_radon::{DiscreteSHT, DyadicGrid};

use crate::config::{rule, Config};
use crate::report::{csv_table, Report};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Grid,
    Whitney,
    Cz,
    Kernel,
    Improve,
    Modulus,
    Sparse,
    Weights,
    All,
}

impl Command {
    pub const STAGES: [Command; 8] =
        [Command::Grid, Command::Whitney, Command::Cz, Command::Kernel, Command::Improve, Command::Modulus, Command::Sparse, Command::Weights];
}

pub fn run(cmd: Command, cfg: &Config, rep: &mut Report) -> Result<()> {
    match cmd {
        Command::All => Command::STAGES.iter().try_for_each(|&c| run(c, cfg, rep)),
        Command::Grid => grid(cfg, rep),
        Command::Whitney => whitney_stage(cfg, rep),
        Command::Cz => cz(cfg, rep),
        Command::Kernel => kernel(cfg, rep),
        Command::Improve => improve(cfg, rep),
        Command::Modulus => modulus(cfg, rep),
        Command::Sparse => sparse(cfg, rep),
        Command::Weights => weights(cfg, rep),
    }
}

fn spacing(s: &DiscreteSHT) -> f64 {
    s.cloud().spacing().iter().copied().fold(f64::INFINITY, f64::min)
}

fn global_average(s: &DiscreteSHT, f: &[f64]) -> f64 {
    s.weights().iter().zip(f).map(|(w, v)| w * v.abs()).sum::<f64>() / s.total_measure()
}

fn grid(cfg: &Config, rep: &mut Report) -> Result<()> {
    let sht = cfg.sht()?;
    let g = cfg.grid(sht.clone())?;
    let axioms = g.verify();
    rep.value("grid.points", sht.len());
    rep.value("grid.metric", sht.metric().name());
    rep.number("grid.kappa", sht.kappa());
    rep.number("grid.delta", g.delta());
    rep.number("grid.sandwich_constant", g.outer());
    rep.number("grid.epsilon", g.epsilon());
    rep.value("grid.generations", g.k_max() + 1);
    rep.value("grid.cubes", g.len());
    rep.value("grid.axioms", format!("{}/6", axioms.passed()));
    for (i, f) in axioms.failures.iter().enumerate() {
        rep.value(&format!("grid.failure.{i}"), f);
    }
    rep.verdict("grid.axioms", axioms.all());
    rep.verdict("grid.epsilon", g.epsilon() >= sparse_radon::dyadic::MIN_EPSILON);
    rep.file("grid.txt", g.dump());
    Ok(())
}

fn whitney_constant_for(cfg: &Config, g: &DyadicGrid, name: &str) -> Result<f64> {
    Ok(match rule(name)? {
        WhitneyRule::Smallest => smallest_whitney_constant(g),
        WhitneyRule::Constrained => {
            let op = cfg.operator(g.sht_arc().clone(), &cfg.operator.curve)?;
            whitney_constant(g, support_constants(&op, g)?.displacement)?.value
        }
    })
}

fn whitney_stage(cfg: &Config, rep: &mut Report) -> Result<()> {
    let sht = cfg.sht()?;
    let g = cfg.grid(sht.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let f = random_smooth(&sht, &mut rng);
    let level = cfg.whitney.level * global_average(&sht, &f);
    let omega: Vec<bool> = dyadic_maximal(&g, &f, 1.0)?.iter().map(|&m| m > level).collect();
    let constant = whitney_constant_for(cfg, &g, &cfg.whitney.rule)?;
    let fam = whitney(&g, &omega, constant)?;
    let r = &fam.report;
    rep.value("whitney.omega", omega.iter().filter(|&&b| b).count());
    rep.number("whitney.constant", fam.constant);
    rep.number("whitney.perfectness", fam.perfectness);
    rep.value("whitney.cubes", fam.cubes.len());
    rep.value("whitney.atoms", fam.atoms.len());
    rep.number("whitney.min_ratio", r.min_ratio);
    rep.number("whitney.max_ratio", r.max_ratio);
    rep.number("whitney.lower_factor", r.lower_factor);
    rep.number("whitney.upper_factor", r.upper_factor);
    rep.verdict("whitney.cover", r.covers && r.inside);
    rep.verdict("whitney.disjoint", r.disjoint);
    rep.verdict("whitney.distance_bounds", r.lower && r.upper);
    rep.file("whitney.txt", fam.dump(&g));
    Ok(())
}

fn cz(cfg: &Config, rep: &mut Report) -> Result<()> {
    let sht = cfg.sht()?;
    let g = cfg.grid(sht.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut recon, mut mean_zero, mut bound, mut supports) = (0.0f64, 0.0f64, 0.0f64, true);
    let mut rows = Vec::new();
    for k in 0..cfg.cz.samples {
        let f = random_smooth(&sht, &mut rng);
        let lambda = cfg.cz.level * global_average(&sht, &f);
        let res = cz_decompose(&g, &f, lambda)?;
        let err = res.reconstruct().iter().zip(&f).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let integral = res.cubes.iter().map(|c| c.integral(&sht).abs()).fold(0.0, f64::max);
        supports &= res.cubes.iter().all(|c| match c.id {
            Some(id) => c.members == g.cube(id).members,
            None => c.members.len() == 1,
        });
        recon = recon.max(err);
        mean_zero = mean_zero.max(integral);
        bound = bound.max(res.bound);
        rows.push(vec![k.to_string(), lambda.to_string(), res.cubes.len().to_string(), err.to_string(), integral.to_string(), res.bound.to_string()]);
    }
    rep.value("cz.samples", cfg.cz.samples);
    rep.number("cz.reconstruction", recon);
    rep.number("cz.max_integral", mean_zero);
    rep.number("cz.good_bound", bound);
    rep.verdict("cz.reconstruction", recon <= 1e-12);
    rep.verdict("cz.mean_zero", mean_zero <= 1e-10);
    rep.verdict("cz.supports", supports);
    rep.verdict("cz.good_bound", bound <= 10.0);
    rep.file("cz.csv", csv_table(&["sample", "lambda", "cubes", "reconstruction", "max_integral", "good_bound"], &rows)?);
    Ok(())
}

fn kernel(cfg: &Config, rep: &mut Report) -> Result<()> {
    let k = CZKernel::by_name(&cfg.operator.kernel, cfg.operator.radius)?;
    let ladder = KernelLadder::new(k, cfg.kernel.delta, cfg.kernel.levels)?;
    let err = ladder.reconstruction_error(2000);
    let integrals = ladder.integrals();
    let c1 = ladder.c1_norms();
    let worst = integrals.iter().skip(1).map(|v| v.abs()).fold(0.0, f64::max);
    let spread = c1.iter().copied().fold(0.0, f64::max) / c1.iter().copied().fold(f64::INFINITY, f64::min);
    rep.value("kernel.levels", ladder.levels());
    rep.number("kernel.reconstruction", err);
    rep.number("kernel.max_integral", worst);
    rep.number("kernel.c1_spread", spread);
    rep.verdict("kernel.reconstruction", err <= 1e-8);
    rep.verdict("kernel.mean_zero", worst <= 1e-12);
    rep.verdict("kernel.c1_spread", spread <= 2.0);
    let rows: Vec<Vec<String>> = integrals.iter().zip(&c1).enumerate().map(|(j, (i, c))| vec![j.to_string(), i.to_string(), c.to_string()]).collect();
    rep.file("kernel.csv", csv_table(&["piece", "integral", "c1_norm"], &rows)?);
    Ok(())
}

fn frontier(cfg: &Config, sht: &std::sync::Arc<DiscreteSHT>, curve: &str) -> Result<(Option<f64>, String)> {
    let op = cfg.operator(sht.clone(), curve)?;
    let piece = cfg.piece();
    let apply = |f: &[f64]| op.apply_single_scale(&piece, f);
    let adjoint = |g: &[f64]| op.adjoint_piece(&piece, 0, g);
    let use_adjoint = cfg.improve.adjoint && op.curve().is_invertible();
    let h = spacing(sht);
    let widths: Vec<f64> = cfg.improve.widths.iter().map(|w| w * h).collect();
    let pairs = pairs_at(cfg.exponents.r, cfg.improve.lowest, cfg.improve.step);
    let adj: Option<sparse_radon::analysis::Apply> = if use_adjoint { Some(&adjoint) } else { None };
    let region = map_improving_region(sht, &apply, adj, &pairs, &widths, cfg.seed)?;
    Ok((region.frontier(cfg.exponents.r), region.to_csv()))
}

fn improve(cfg: &Config, rep: &mut Report) -> Result<()> {
    let sht = cfg.sht()?;
    let (main, csv) = frontier(cfg, &sht, &cfg.operator.curve)?;
    rep.value("improve.r", cfg.exponents.r);
    rep.value("improve.frontier", fmt_opt(main));
    rep.file("improve.csv", csv);
    if let Some(other) = &cfg.improve.compare {
        let (cmp, csv) = frontier(cfg, &sht, other)?;
        rep.value("improve.compare", other);
        rep.value("improve.compare_frontier", fmt_opt(cmp));
        if let (Some(a), Some(b)) = (main, cmp) {
            rep.number("improve.contrast", b - a);
        }
        rep.file("improve_compare.csv", csv);
    }
    rep.verdict("improve.diagonal_bounded", main.is_some());
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("none".into(), crate::report::fmt_number)
}

fn modulus(cfg: &Config, rep: &mut Report) -> Result<()> {
    let sht = cfg.sht()?;
    let sys = models::system_by_name(&cfg.modulus.system)?;
    if sys.dim() != sht.dim() || cfg.modulus.direction.len() != sys.len() {
        bail!("modulus.system must match the cloud dimension and modulus.direction needs one entry per field");
    }
    let op = cfg.operator(sht.clone(), &cfg.operator.curve)?;
    let piece = cfg.piece();
    let apply = |f: &[f64]| op.apply_single_scale(&piece, f);
    let flow = graded_flow(&sys, &cfg.modulus.direction);
    let h = spacing(&sht);
    let widths: Vec<f64> = cfg.modulus.widths.iter().map(|w| w * h).collect();
    let center: Vec<f64> = sht.cloud().lo().iter().zip(sht.cloud().hi()).map(|(a, b)| 0.5 * (a + b)).collect();
    let samples: Vec<Vec<f64>> = spike_family(&sht, &center, &widths, None, cfg.seed)?.into_iter().map(|s| s.values).collect();
    let (lo, hi) = (cfg.modulus.window[0], cfg.modulus.window[1]);
    let mut bs = vec![0.0];
    bs.extend(log_range(lo, hi, cfg.modulus.count));
    let fit = modulus_exponent(&sht, &apply, &flow, &bs, &samples, (lo, hi))?;
    rep.number("modulus.exponent", fit.exponent);
    rep.number("modulus.r2", fit.r2);
    rep.number("modulus.at_zero", fit.rows[0].1);
    rep.verdict("modulus.zero_shift", fit.rows[0].1 == 0.0);
    rep.verdict("modulus.positive_exponent", fit.exponent > 0.0);
    rep.file("modulus.csv", fit.to_csv());
    Ok(())
}

fn sparse(cfg: &Config, rep: &mut Report) -> Result<()> {
    let sp = &cfg.sparse;
    let sht = cfg.sht()?;
    if sp.start.len() != sht.dim() {
        bail!("sparse.start needs {} coordinates", sht.dim());
    }
    let g = cfg.grid(sht.clone())?;
    let op = cfg.operator(sht.clone(), &cfg.operator.curve)?;
    let e = cfg.exponents;
    let params = SelectParams { r: e.r, s: e.s, sigma: sp.sigma, whitney: rule(&sp.whitney)? };
    let selector = Selector::new(&op, &g, params)?;
    let support = selector.support();
    let q0 = starting_cube(&g, sht.cloud().nearest(&sp.start), sp.generation)?;
    let (mut c_emp, mut verified, mut finite) = (0.0f64, true, true);
    let mut rows = Vec::new();
    for k in 0..sp.pairs {
        let (mut f1, f2) = random_block_pair(&g, q0, sp.blocks, cfg.seed.wrapping_add(k as u64));
        if sp.zero_first {
            f1.iter_mut().for_each(|v| *v = 0.0);
        }
        let sel = selector.select(q0, &f1, &f2)?;
        let check = verify_sparse(&sel.family, &sht);
        let dom = domination_check(&op, &sel.family, &f1, &f2, e.r, e.s, support.kappa_prime)?;
        verified &= check.holds();
        finite &= dom.ratio.is_finite();
        c_emp = c_emp.max(dom.ratio);
        rows.push(vec![
            k.to_string(),
            sel.family.len().to_string(),
            sel.family.max_generation().to_string(),
            check.worst_ratio.to_string(),
            dom.lhs.to_string(),
            dom.rhs.to_string(),
            dom.ratio.to_string(),
        ]);
        if k == 0 {
            rep.file("family.txt", sel.family.dump(&sht));
            rep.file("trace.csv", sel.trace_csv());
        }
    }
    rep.value("sparse.pairs", sp.pairs);
    rep.value("sparse.start_cube", format!("{}:{}", q0.generation, q0.rank));
    rep.number("sparse.displacement", support.displacement);
    rep.number("sparse.kappa_prime", support.kappa_prime);
    rep.number("sparse.whitney_constant", selector.whitney_constant());
    rep.number("sparse.c_emp", c_emp);
    rep.verdict("sparse.verified", verified);
    rep.verdict("sparse.c_emp_finite", finite);
    rep.file("sparse.csv", csv_table(&["pair", "cubes", "max_generation", "worst_witness_ratio", "lhs", "rhs", "ratio"], &rows)?);
    Ok(())
}

fn weights(cfg: &Config, rep: &mut Report) -> Result<()> {
    let sht = cfg.sht()?;
    let g = cfg.grid(sht.clone())?;
    let w = cfg.weight(&sht)?;
    let op = cfg.operator(sht.clone(), &cfg.operator.curve)?;
    let e = cfg.exponents;
    let q0 = starting_cube(&g, sht.cloud().nearest(&cfg.sparse.start), cfg.sparse.generation.min(g.k_max()))?;
    let mut tests = Vec::new();
    for k in 0..cfg.weight.tests.div_ceil(2) {
        let (a, b) = random_block_pair(&g, q0, cfg.weight.blocks, cfg.seed.wrapping_add(k as u64));
        tests.push(a);
        tests.push(b);
    }
    tests.truncate(cfg.weight.tests);
    let apply = |f: &[f64]| op.apply_full(f);
    let chk = weighted_norm_check(&g, &apply, &w, (e.r, e.p, e.s), &tests)?;
    let unit = a_p_constant(&Weight::constant(&sht, 1.0)?, e.p / e.r, &g)?;
    let q = e.p / e.r;
    let q_dual = q / (q - 1.0);
    let dual = a_p_constant(&w.power_of(1.0 - q_dual)?, q_dual, &g)?.powf(q - 1.0);
    let duality = (chk.a_const - dual).abs() / chk.a_const;
    rep.value("weights.clamped", w.clamped());
    rep.number("weights.a_const", chk.a_const);
    rep.number("weights.rh_const", chk.rh_const);
    rep.number("weights.alpha", chk.alpha);
    rep.number("weights.bound", chk.bound);
    rep.number("weights.c_emp", chk.c_emp);
    rep.number("weights.ratio", chk.ratio());
    rep.number("weights.unit_a_const", unit);
    rep.number("weights.duality_defect", duality);
    rep.verdict("weights.unit_weight", unit == 1.0);
    rep.verdict("weights.duality", duality <= 1e-10);
    rep.verdict("weights.finite", chk.c_emp.is_finite() && chk.bound.is_finite());
    Ok(())
}

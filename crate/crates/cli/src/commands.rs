use std::fs;
use std::path::Path;

use mirm_core::binomial::{
    ferm_at, invariance_table, BinomialFerm, FactorLattice, FactorModelSpec, LatticeClaimFile, Payoffs,
};
use mirm_core::finite::{
    noncompliance_scan, ClassicalEntropic, EntropyConvention, FiniteModel, FiniteTreeMarket, ScanTable, SuperHedge,
};
use mirm_core::forward::{
    entropic_consistency, ferm_mc, supermartingale_probe, CoefficientSpec, PathBundle, PathClaim, PathClaimSpec,
    StrategyFamily,
};
use mirm_core::pde::{
    compute_g, fk_oracle, noncompliance_gap, solve_linear_f, solve_quasilinear_p, FkKind, FkSign, SvSpec,
};
use mirm_core::{axiom_check, earliest_maturity, Axiom, InformationTree, MirmError, NodeClaim, Result, RiskEvaluator};

use crate::args::*;
use crate::output::{real, Table};

pub const FERM_SIGN: &str = "rho(C) = E^(0,t_C)(-C)";
pub const H_SIGN: &str = "H_t = -ln(-sup E[-exp(-gamma G_t)])";

/// What a command produced: the CSV, report rows, the seeds it used and the
/// outcome of its acceptance check.
#[derive(Debug)]
pub struct Outcome {
    pub table: Table,
    pub summary: Vec<(String, String)>,
    pub seeds: Vec<u64>,
    pub conventions: Vec<(&'static str, String)>,
    pub check: Option<bool>,
}

impl Outcome {
    fn new(table: Table) -> Self {
        Self { table, summary: Vec::new(), seeds: Vec::new(), conventions: Vec::new(), check: None }
    }

    fn note(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.to_string(), value.to_string()));
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| MirmError::InvalidInput(format!("{}: {e}", path.display())))
}

fn gamma(common: &Common, default: f64) -> Result<f64> {
    let g = common.gamma.unwrap_or(default);
    if !(g > 0.0 && g.is_finite()) {
        return Err(MirmError::InvalidInput(format!("gamma must be positive, got {g}")));
    }
    Ok(g)
}

fn paths(common: &Common, default: usize) -> Result<usize> {
    match common.paths.unwrap_or(default) {
        n if n >= 2 => Ok(n),
        n => Err(MirmError::InvalidInput(format!("need at least two paths, got {n}"))),
    }
}

pub fn run(command: &Command, common: &Common) -> Result<Outcome> {
    match command {
        Command::Finite(c) => finite(c, common),
        Command::Binomial(c) => binomial(c, common),
        Command::Pde(c) => pde(c, common),
        Command::Forward(c) => forward(c, common),
        Command::Axioms(a) => axioms(a, common),
    }
}

fn convention(c: ConventionArg) -> EntropyConvention {
    match c {
        ConventionArg::Standard => EntropyConvention::Standard,
        ConventionArg::PrintedRatio => EntropyConvention::PrintedRatio,
    }
}

fn finite_model(common: &Common, conv: ConventionArg) -> Result<FiniteModel> {
    let market = match &common.config {
        Some(p) => FiniteTreeMarket::from_json(&read(p)?)?,
        None => FiniteTreeMarket::example(),
    };
    FiniteModel::with_convention(market, convention(conv))
}

fn finite_claim(common: &Common, model: &FiniteModel) -> Result<NodeClaim> {
    let Some(p) = &common.claim else {
        return model.indicator_claim(1.0);
    };
    let file = LatticeClaimFile::from_json(&read(p)?)?;
    let Payoffs::List(values) = file.payoffs else {
        return Err(MirmError::InvalidInput("finite claims take a payoff list".into()));
    };
    let claim = NodeClaim::new(file.depth, values)?;
    claim.check(model.market())?;
    Ok(claim)
}

fn finite(cmd: &FiniteCmd, common: &Common) -> Result<Outcome> {
    match *cmd {
        FiniteCmd::Eval { t, measure, convention } => {
            let model = finite_model(common, convention)?;
            let claim = finite_claim(common, &model)?;
            let t = t.unwrap_or(claim.depth());
            let g = gamma(common, 1.0)?;
            let rho = match measure {
                FiniteMeasure::Entropic => model.entropic_rho_dual(&claim, t, g)?,
                FiniteMeasure::Superhedge => model.superhedge_rho(&claim, t)?,
            };
            let mut table = Table::new(&["quantity", "value"]);
            table.push(vec!["t".into(), t.to_string()]);
            table.push(vec!["rho".into(), real(rho)]);
            let mut out = Outcome::new(table);
            out.note("measure", format!("{measure:?}").to_lowercase());
            out.conventions.push(("entropy_convention", model.convention().to_string()));
            out.conventions.push(("entropy_penalty", "normalized".into()));
            Ok(out)
        }
        FiniteCmd::Noncompliance { ref a, convention } => {
            let model = finite_model(common, convention)?;
            let g = gamma(common, 1.0)?;
            let scan: ScanTable = noncompliance_scan(&model, g, a)?;
            let mut table = Table::new(&ScanTable::HEADER);
            for r in &scan.rows {
                table.push(vec![real(r.a), real(r.rho_t1), real(r.rho_t2), real(r.gap)]);
            }
            let mut out = Outcome::new(table);
            out.note("max_abs_gap", real(scan.max_abs_gap));
            out.note("argmax_a", real(scan.argmax_a));
            out.conventions.push(("entropy_convention", model.convention().to_string()));
            out.conventions.push(("entropy_penalty", "normalized".into()));
            out.check = Some(scan.max_abs_gap > 1e-3);
            Ok(out)
        }
    }
}

fn lattice(common: &Common) -> Result<FactorLattice> {
    let spec = match &common.config {
        Some(p) => FactorModelSpec::from_json(&read(p)?)?,
        None => FactorModelSpec::example(5),
    };
    FactorLattice::new(&spec)
}

fn lattice_claim(common: &Common, lattice: &FactorLattice) -> Result<NodeClaim> {
    match &common.claim {
        Some(p) => LatticeClaimFile::from_json(&read(p)?)?.to_claim(lattice),
        None => lattice.claim_from(3.min(lattice.horizon()), |s, y| (s - 1.0).max(0.0) + 0.5 * (y - 1.0)),
    }
}

fn binomial(cmd: &BinomialCmd, common: &Common) -> Result<Outcome> {
    let lat = lattice(common)?;
    let g = gamma(common, 1.0)?;
    let claim = lattice_claim(common, &lat)?.map(|c| g * c)?;
    let tc = earliest_maturity(&claim, &lat)?;
    let mut out = match *cmd {
        BinomialCmd::Eval { t } => {
            let t = t.unwrap_or(tc);
            let rho = ferm_at(&lat, &claim, t)? / g;
            let mut table = Table::new(&["quantity", "value"]);
            table.push(vec!["t_c".into(), tc.to_string()]);
            table.push(vec!["t".into(), t.to_string()]);
            table.push(vec!["rho".into(), real(rho)]);
            Outcome::new(table)
        }
        BinomialCmd::Invariance => {
            let rows = invariance_table(&lat, &claim)?;
            let mut table = Table::new(&["t", "rho_t"]);
            for &(t, r) in &rows {
                table.push(vec![t.to_string(), real(r / g)]);
            }
            let lo = rows.iter().map(|r| r.1 / g).fold(f64::INFINITY, f64::min);
            let hi = rows.iter().map(|r| r.1 / g).fold(f64::NEG_INFINITY, f64::max);
            let mut out = Outcome::new(table);
            out.note("spread", real(hi - lo));
            out.check = Some(hi - lo <= 1e-9);
            out
        }
    };
    out.note("gamma", real(g));
    out.conventions.push(("ferm_sign", FERM_SIGN.into()));
    Ok(out)
}

fn sv_spec(common: &Common) -> Result<SvSpec> {
    let mut spec = match &common.config {
        Some(p) => SvSpec::from_json(&read(p)?)?,
        None => SvSpec::default(),
    };
    if let Some(s) = common.fk_sign {
        spec.fk_sign = match s {
            FkSignArg::PaperPde => FkSign::PaperPde,
            FkSignArg::PaperFk => FkSign::PaperFk,
        };
    }
    spec.validate()?;
    Ok(spec)
}

fn pde(cmd: &PdeCmd, common: &Common) -> Result<Outcome> {
    let spec = sv_spec(common)?;
    let mut out = match *cmd {
        PdeCmd::Solve { which } => {
            let horizon = match which {
                WhichArg::F | WhichArg::G | WhichArg::P => spec.t,
                WhichArg::FBar | WhichArg::GBar | WhichArg::PBar => spec.t_bar,
            };
            let f = solve_linear_f(&spec, horizon)?;
            let sol = match which {
                WhichArg::F | WhichArg::FBar => f,
                WhichArg::G | WhichArg::GBar => compute_g(&spec, &f)?.pde,
                WhichArg::P | WhichArg::PBar => solve_quasilinear_p(&spec, &f, spec.t)?,
            };
            let mut table = Table::new(&["t", "y", "value"]);
            for (t, y, v) in sol.long_rows() {
                table.push(vec![real(t), real(y), real(v)]);
            }
            let mut out = Outcome::new(table);
            out.note("which", sol.which);
            out.note("horizon", real(sol.horizon));
            out.note("theta", real(sol.theta));
            out.note("boundary", sol.boundary);
            out.note("rannacher", sol.rannacher);
            for w in &sol.warnings {
                out.note("warning", w);
            }
            out
        }
        PdeCmd::Gap => {
            let report = noncompliance_gap(&spec)?;
            let mut table = Table::new(&["quantity", "value"]);
            for (k, v) in report.rows() {
                table.push(vec![k, real(v)]);
            }
            let mut out = Outcome::new(table);
            out.check = Some(report.passes());
            out
        }
        PdeCmd::Fk { kind, t, y } => {
            let kind = match kind {
                KindArg::F => FkKind::F,
                KindArg::FBar => FkKind::FBar,
                KindArg::GBar => FkKind::GBar,
            };
            let n = paths(common, 100_000)?;
            let e = fk_oracle(&spec, kind, t, y, n, common.seed)?;
            let mut table = Table::new(&["quantity", "estimate", "std_error", "n_paths", "seed"]);
            table.push(vec![
                format!("{kind}({},{})", real(t), real(y)),
                real(e.value),
                real(e.std_error),
                n.to_string(),
                common.seed.to_string(),
            ]);
            let mut out = Outcome::new(table);
            out.seeds.push(common.seed);
            out.note("euler_steps", e.steps);
            out
        }
    };
    out.conventions.push(("fk_sign", spec.fk_sign.to_string()));
    Ok(out)
}

fn forward_spec(common: &Common) -> Result<CoefficientSpec> {
    let mut spec = match &common.config {
        Some(p) => CoefficientSpec::from_json(&read(p)?)?,
        None => CoefficientSpec::constant(1.0, 0.2, 0.2, 16, 0.0625),
    };
    if common.gamma.is_some() {
        spec.gamma = gamma(common, 1.0)?;
    }
    spec.validate()?;
    Ok(spec)
}

fn forward_claim(common: &Common) -> Result<PathClaim> {
    match &common.claim {
        Some(p) => PathClaimSpec::from_json(&read(p)?)?.build(),
        None => PathClaimSpec::Mixed { maturity: 0.5, a: 1.0, b: 1.0 }.build(),
    }
}

fn family(s: &StrategyArgs) -> StrategyFamily {
    StrategyFamily { cell_width: s.cell_width, bound: s.bound, ..StrategyFamily::default() }
}

fn mc_table() -> Table {
    Table::new(&["quantity", "estimate", "std_error", "n_paths", "seed"])
}

fn mc_row(table: &mut Table, name: &str, est: f64, se: f64, n: usize, seed: u64) {
    table.push(vec![name.into(), real(est), real(se), n.to_string(), seed.to_string()]);
}

fn forward(cmd: &ForwardCmd, common: &Common) -> Result<Outcome> {
    let spec = forward_spec(common)?;
    let seed = common.seed;
    let mut out = match cmd {
        ForwardCmd::Simulate => {
            let n = paths(common, 10_000)?;
            let b = PathBundle::simulate(&spec, n, seed)?;
            let mut table = mc_table();
            let mut column = |name: &str, k: usize, f: &dyn Fn(usize) -> f64| {
                let v: Vec<f64> = (0..n).map(f).collect();
                let (m, se) = mirm_core::numeric::mean_and_se(&v);
                mc_row(&mut table, &format!("{name}@{}", real(k as f64 * spec.dt)), m, se, n, seed);
            };
            for k in 0..=spec.n_steps {
                column("s", k, &|i| b.path(i).s[k]);
                column("y", k, &|i| b.path(i).y[k]);
                column("z", k, &|i| b.path(i).z[k]);
                column("a", k, &|i| b.path(i).a[k]);
            }
            let mut out = Outcome::new(table);
            out.note("a_monotone", b.a_is_monotone());
            out
        }
        ForwardCmd::Ferm { horizon, strategies } => {
            let n = paths(common, 100_000)?;
            let claim = forward_claim(common)?;
            let t = horizon.unwrap_or(claim.maturity());
            let e = ferm_mc(&spec, &claim, t, &family(strategies), n, seed)?;
            let mut table = mc_table();
            mc_row(&mut table, &format!("ferm@{}", real(t)), e.value, e.std_error, n, seed);
            let mut out = Outcome::new(table);
            out.note("theta", format!("{:?}", e.theta));
            out
        }
        ForwardCmd::Consistency { horizon, strategies } => {
            let n = paths(common, 100_000)?;
            let claim = forward_claim(common)?;
            let t = horizon.unwrap_or(claim.maturity());
            let r = entropic_consistency(&spec, &claim, t, &family(strategies), n, seed)?;
            let mut table = mc_table();
            mc_row(&mut table, "ferm", r.ferm, r.ferm_se, n, seed);
            mc_row(&mut table, "rhs", r.rhs, r.rhs_se, n, seed);
            mc_row(&mut table, "diff", r.diff, r.combined_se, n, seed);
            mc_row(&mut table, "nu", r.nu, r.nu_se, n, seed);
            mc_row(&mut table, "h", r.h, r.h_se, n, seed);
            let mut out = Outcome::new(table);
            out.check = Some(r.within(3.0));
            out
        }
        ForwardCmd::Probe { horizon, x, strategies_count, strategies } => {
            let n = paths(common, 100_000)?;
            let t = horizon.unwrap_or(spec.horizon());
            let r = supermartingale_probe(&spec, t, *x, &family(strategies), *strategies_count, n, seed)?;
            let mut table = mc_table();
            mc_row(&mut table, "u0", r.u0, 0.0, n, seed);
            for (i, row) in r.rows.iter().enumerate() {
                mc_row(&mut table, &format!("strategy_{i}"), row.expected_utility, row.std_error, n, seed);
            }
            mc_row(&mut table, "best", r.best.expected_utility, r.best.std_error, n, seed);
            let mut out = Outcome::new(table);
            out.note("max_excess_in_se", real(r.max_excess_in_se));
            out.check = Some(r.max_excess_in_se <= 3.0);
            out
        }
    };
    out.seeds.push(seed);
    out.note("gamma", real(spec.gamma));
    out.conventions.push(("ferm_sign", FERM_SIGN.into()));
    out.conventions.push(("h_sign", H_SIGN.into()));
    Ok(out)
}

fn run_axioms<E: RiskEvaluator>(e: &E, args: &AxiomsArgs, seed: u64) -> Result<Vec<(Axiom, f64)>> {
    Axiom::ALL
        .into_iter()
        .map(|ax| {
            let r = axiom_check(e, ax, args.trials, seed).map_err(|f| f.source)?;
            Ok((ax, r.max_violation))
        })
        .collect()
}

fn axioms(args: &AxiomsArgs, common: &Common) -> Result<Outcome> {
    let seed = common.seed;
    let mut conventions = Vec::new();
    let results = match args.model {
        AxiomModel::Binomial => {
            let lat = lattice(common)?;
            conventions.push(("ferm_sign", FERM_SIGN.to_string()));
            run_axioms(&BinomialFerm { lattice: &lat }, args, seed)?
        }
        AxiomModel::FiniteEntropic => {
            let model = finite_model(common, ConventionArg::Standard)?;
            conventions.push(("entropy_penalty", "normalized".into()));
            run_axioms(&ClassicalEntropic { model: &model, gamma: gamma(common, 1.0)? }, args, seed)?
        }
        AxiomModel::Superhedge => {
            let model = finite_model(common, ConventionArg::Standard)?;
            run_axioms(&SuperHedge { model: &model }, args, seed)?
        }
    };
    let mut table = Table::new(&["axiom", "trials", "max_violation", "seed"]);
    for (ax, v) in &results {
        table.push(vec![ax.to_string(), args.trials.to_string(), real(*v), seed.to_string()]);
    }
    let mut out = Outcome::new(table);
    out.seeds.push(seed);
    out.conventions = conventions;
    out.note("model", format!("{:?}", args.model).to_lowercase());
    out.check = Some(results.iter().all(|(_, v)| *v <= args.tolerance));
    Ok(out)
}

use crate::table::{Cell, Table};
use crate::{input_error, Context, MetricArg};
use anyhow::Result;
use clap::ValueEnum;
use covert_a2g::detection::expected_min_dep;
use covert_a2g::oracle::{mc_ergodic_capacity, mc_expected_min_dep, mc_outage, mc_radiometer_dep, McEstimate, RadiometerConfig};
use covert_a2g::planner::{maximize_csc, maximize_ecr, select_mode, Metric, ModeDecision, OptimizationResult};
use covert_a2g::scenario::{db_to_linear, linear_to_db, Mode, Scenario};
use covert_a2g::throughput::{covert_capacity, ecr, outage, snr_threshold};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepAxis {
    /// Noise uncertainty, dB.
    Rho,
    /// Operating transmit power, dBm.
    #[value(name = "p_a")]
    PA,
    /// UAV x coordinate, m.
    #[value(name = "x_a")]
    XA,
    /// Target rate, bit/s.
    #[value(name = "r_b")]
    RB,
    Epsilon,
    /// Power budget, dBm.
    #[value(name = "p_max")]
    PMax,
}

impl SweepAxis {
    pub fn key(self) -> &'static str {
        match self {
            SweepAxis::Rho => "noise.rho_db",
            SweepAxis::PA => "power.p_a_dbm",
            SweepAxis::XA => "alice.x",
            SweepAxis::RB => "link.r_b",
            SweepAxis::Epsilon => "covert.epsilon",
            SweepAxis::PMax => "power.p_max_dbm",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Rho => "rho",
            SweepAxis::PA => "p_a",
            SweepAxis::XA => "x_a",
            SweepAxis::RB => "r_b",
            SweepAxis::Epsilon => "epsilon",
            SweepAxis::PMax => "p_max",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepMetric {
    Dep,
    Outage,
    Ecr,
    Csc,
    #[value(name = "ecr_opt")]
    EcrOpt,
    #[value(name = "csc_opt")]
    CscOpt,
}

impl SweepMetric {
    pub fn name(self) -> &'static str {
        match self {
            SweepMetric::Dep => "dep",
            SweepMetric::Outage => "outage",
            SweepMetric::Ecr => "ecr",
            SweepMetric::Csc => "csc",
            SweepMetric::EcrOpt => "ecr_opt",
            SweepMetric::CscOpt => "csc_opt",
        }
    }

    fn is_opt(self) -> bool {
        matches!(self, SweepMetric::EcrOpt | SweepMetric::CscOpt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeSel {
    Om,
    Dm,
    Hybrid,
}

impl ModeSel {
    fn name(self) -> &'static str {
        match self {
            ModeSel::Om => "OM",
            ModeSel::Dm => "DM",
            ModeSel::Hybrid => "hybrid",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub from: f64,
    pub to: f64,
    pub points: usize,
    pub metrics: Vec<SweepMetric>,
    pub modes: Vec<ModeSel>,
}

fn dedup<T: PartialEq + Copy>(xs: &[T]) -> Vec<T> {
    let mut out = Vec::new();
    for &x in xs {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

fn join<T>(xs: &[T], f: impl Fn(&T) -> &'static str) -> String {
    xs.iter().map(f).collect::<Vec<_>>().join(",")
}

/// Evenly spaced values from `from` to `to` inclusive.
pub fn linspace(from: f64, to: f64, points: usize) -> Result<Vec<f64>> {
    if !from.is_finite() || !to.is_finite() {
        return Err(input_error("range end points must be finite"));
    }
    if points < 2 {
        return Err(input_error("a range needs at least 2 points"));
    }
    let n = (points - 1) as f64;
    Ok((0..points).map(|i| from + (to - from) * i as f64 / n).collect())
}

/// splitmix64 finaliser over `seed` and a tag, giving each Monte Carlo
/// estimate in a run its own reproducible seed.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Scenario with one file key overridden. Positions along the x axis are
/// always computed; leaving the safe-distance window only warns.
fn variant(ctx: &Context, key: &str, value: f64) -> Result<Scenario> {
    let mut cfg = ctx.config.clone();
    cfg.set(key, value).map_err(|e| input_error(e.to_string()))?;
    let lenient = ctx.allow_unsafe || key == "alice.x";
    cfg.resolve(lenient).map_err(|e| input_error(e.to_string()))
}

fn mode_of(m: ModeSel) -> Option<Mode> {
    match m {
        ModeSel::Om => Some(Mode::Om),
        ModeSel::Dm => Some(Mode::Dm),
        ModeSel::Hybrid => None,
    }
}

#[derive(Debug, Clone, Default)]
struct ModeEval {
    dep: f64,
    outage: f64,
    ecr: f64,
    csc: f64,
    ecr_opt: Option<OptimizationResult>,
    csc_opt: Option<OptimizationResult>,
    mc_dep: Option<McEstimate>,
    mc_outage: Option<McEstimate>,
    mc_csc: Option<McEstimate>,
}

fn evaluate(ctx: &Context, sc: &Scenario, mode: Mode, metrics: &[SweepMetric], row_seed: u64) -> Result<ModeEval> {
    let uav = sc.alice;
    let p = sc.p_a;
    let has = |m| metrics.contains(&m);
    let gamma = snr_threshold(sc.r_b, sc.band(mode).bandwidth);
    let n = ctx.samples.unwrap_or(100_000);
    let mut e = ModeEval::default();
    if has(SweepMetric::Dep) {
        e.dep = expected_min_dep(sc, uav, p, mode)?.value;
        if ctx.mc {
            e.mc_dep = Some(mc_expected_min_dep(sc, uav, p, mode, n, derive_seed(row_seed, 0))?);
        }
    }
    if has(SweepMetric::Outage) || has(SweepMetric::Ecr) {
        e.outage = outage(sc, uav, p, gamma, mode)?;
        e.ecr = ecr(sc.r_b, e.outage);
        if ctx.mc {
            e.mc_outage = Some(mc_outage(sc, uav, p, gamma, mode, n, derive_seed(row_seed, 1))?);
        }
    }
    if has(SweepMetric::Csc) {
        e.csc = covert_capacity(sc, uav, p, mode)?;
        if ctx.mc {
            e.mc_csc = Some(mc_ergodic_capacity(sc, uav, p, mode, n, derive_seed(row_seed, 2))?);
        }
    }
    if has(SweepMetric::EcrOpt) {
        e.ecr_opt = Some(maximize_ecr(sc, uav, mode)?);
    }
    if has(SweepMetric::CscOpt) {
        e.csc_opt = Some(maximize_csc(sc, uav, mode)?);
    }
    Ok(e)
}

fn opt_cells(r: &OptimizationResult, with_rate: bool) -> Vec<Cell> {
    let mut v = vec![Cell::Num(r.objective), Cell::Num(r.p_a_opt)];
    if with_rate {
        v.push(r.r_b_opt.map_or(Cell::Empty, Cell::Num));
    }
    v.push(r.binding.as_str().into());
    v.push(r.feasible.into());
    v
}

/// One row per (axis value, mode), in axis order then the requested mode
/// order. Hybrid rows carry only the optimized metrics.
pub fn sweep(ctx: &Context, spec: &SweepSpec) -> Result<Table> {
    let values = linspace(spec.from, spec.to, spec.points)?;
    let metrics = dedup(&spec.metrics);
    let modes = dedup(&spec.modes);
    if metrics.is_empty() || modes.is_empty() {
        return Err(input_error("at least one metric and one mode are required"));
    }
    let hybrid = modes.contains(&ModeSel::Hybrid);
    let any_opt = metrics.iter().any(|m| m.is_opt());
    if hybrid && !any_opt {
        return Err(input_error("hybrid rows need ecr_opt or csc_opt"));
    }
    let plain: Vec<SweepMetric> = metrics.iter().copied().filter(|m| !m.is_opt()).collect();

    let mut columns = vec!["axis_value".to_string(), "mode".to_string()];
    for m in &metrics {
        let n = m.name();
        match m {
            SweepMetric::EcrOpt => {
                for suffix in ["", "_p_a", "_r_b", "_binding", "_feasible"] {
                    columns.push(format!("{n}{suffix}"));
                }
            }
            SweepMetric::CscOpt => {
                for suffix in ["", "_p_a", "_binding", "_feasible"] {
                    columns.push(format!("{n}{suffix}"));
                }
            }
            _ => columns.push(n.to_string()),
        }
        if m.is_opt() && hybrid {
            columns.push(format!("{n}_selected"));
        }
    }
    if ctx.mc {
        columns.extend(plain.iter().map(|m| format!("mc_{}", m.name())));
        columns.extend(plain.iter().map(|m| format!("mc_{}_stderr", m.name())));
    }

    let scenarios: Vec<Scenario> = values
        .iter()
        .map(|&v| variant(ctx, spec.axis.key(), v))
        .collect::<Result<_>>()?;

    let mut needed: Vec<Mode> = modes.iter().filter_map(|&m| mode_of(m)).collect();
    if hybrid {
        needed = Mode::BOTH.to_vec();
    }
    let evals: Vec<Vec<(Mode, ModeEval)>> = scenarios
        .par_iter()
        .enumerate()
        .map(|(i, sc)| {
            needed
                .iter()
                .map(|&mode| {
                    let tag = 2 * i as u64 + u64::from(mode == Mode::Dm);
                    let wanted = if modes.contains(&if mode == Mode::Om { ModeSel::Om } else { ModeSel::Dm }) {
                        metrics.clone()
                    } else {
                        metrics.iter().copied().filter(|m| m.is_opt()).collect()
                    };
                    Ok((mode, evaluate(ctx, sc, mode, &wanted, derive_seed(ctx.seed, tag))?))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut table = Table::new(columns);
    for ((v, sc), per_mode) in values.iter().zip(&scenarios).zip(&evals) {
        let find = |mode: Mode| &per_mode.iter().find(|(m, _)| *m == mode).expect("evaluated").1;
        for &sel in &modes {
            let mut row = vec![Cell::Num(*v), sel.name().into()];
            let mode = mode_of(sel);
            for m in &metrics {
                match (m, mode) {
                    (SweepMetric::EcrOpt | SweepMetric::CscOpt, _) => {
                        let pick = |e: &ModeEval| if *m == SweepMetric::EcrOpt { e.ecr_opt } else { e.csc_opt };
                        let with_rate = *m == SweepMetric::EcrOpt;
                        let (r, selected) = match mode {
                            Some(md) => (pick(find(md)).expect("optimized"), None),
                            None => {
                                let om = pick(find(Mode::Om)).expect("optimized");
                                let dm = pick(find(Mode::Dm)).expect("optimized");
                                if om.objective >= dm.objective {
                                    (om, Some(Mode::Om))
                                } else {
                                    (dm, Some(Mode::Dm))
                                }
                            }
                        };
                        row.extend(opt_cells(&r, with_rate));
                        if hybrid {
                            row.push(selected.map_or(Cell::Empty, |s| s.as_str().into()));
                        }
                    }
                    (_, None) => row.push(Cell::Empty),
                    (_, Some(md)) => {
                        let e = find(md);
                        row.push(Cell::Num(match m {
                            SweepMetric::Dep => e.dep,
                            SweepMetric::Outage => e.outage,
                            SweepMetric::Ecr => e.ecr,
                            _ => e.csc,
                        }));
                    }
                }
            }
            if ctx.mc {
                let mut means = Vec::new();
                let mut errs = Vec::new();
                for m in &plain {
                    let est = mode.map(|md| {
                        let e = find(md);
                        match m {
                            SweepMetric::Dep => e.mc_dep.map(|x| (x.mean, x.std_error)),
                            SweepMetric::Outage => e.mc_outage.map(|x| (x.mean, x.std_error)),
                            SweepMetric::Ecr => e.mc_outage.map(|x| (ecr(sc.r_b, x.mean), sc.r_b * x.std_error)),
                            SweepMetric::Csc => e.mc_csc.map(|x| (x.mean, x.std_error)),
                            _ => None,
                        }
                    });
                    match est.flatten() {
                        Some((mean, se)) => {
                            means.push(Cell::Num(mean));
                            errs.push(Cell::Num(se));
                        }
                        None => {
                            means.push(Cell::Empty);
                            errs.push(Cell::Empty);
                        }
                    }
                }
                row.extend(means);
                row.extend(errs);
            }
            table.push(row);
        }
    }
    table.metadata = ctx.metadata(format!(
        "sweep axis={} from={:e} to={:e} points={} metrics={} modes={} mc={}{}",
        spec.axis.name(),
        spec.from,
        spec.to,
        spec.points,
        join(&metrics, |m| m.name()),
        join(&modes, |m| m.name()),
        ctx.mc,
        if ctx.mc {
            format!(" samples={}", ctx.samples.unwrap_or(100_000))
        } else {
            String::new()
        }
    ));
    Ok(table)
}

fn metrics_for(arg: MetricArg) -> Vec<Metric> {
    match arg {
        MetricArg::Ecr => vec![Metric::Ecr],
        MetricArg::Csc => vec![Metric::Csc],
        MetricArg::Both => vec![Metric::Ecr, Metric::Csc],
    }
}

fn metric_arg_name(arg: MetricArg) -> &'static str {
    match arg {
        MetricArg::Ecr => "ecr",
        MetricArg::Csc => "csc",
        MetricArg::Both => "both",
    }
}

/// Optimum per mode plus the hybrid choice at the configured position.
pub fn optimize(ctx: &Context, metric: MetricArg) -> Result<Table> {
    let sc = &ctx.scenario;
    let mut table = Table::new(
        [
            "metric",
            "mode",
            "feasible",
            "binding",
            "p_a_opt",
            "p_a_opt_dbm",
            "r_b_opt",
            "objective",
            "selected",
        ]
        .map(String::from)
        .to_vec(),
    );
    for m in metrics_for(metric) {
        let d = select_mode(sc, sc.alice, m)?;
        let chosen = if d.indicator == Mode::Om { d.om } else { d.dm };
        for (name, r, selected) in [
            ("OM", d.om, Cell::Empty),
            ("DM", d.dm, Cell::Empty),
            ("hybrid", chosen, Cell::from(d.indicator.as_str())),
        ] {
            table.push(vec![
                m.as_str().into(),
                name.into(),
                r.feasible.into(),
                r.binding.as_str().into(),
                Cell::Num(r.p_a_opt),
                Cell::Num(linear_to_db(r.p_a_opt)),
                r.r_b_opt.map_or(Cell::Empty, Cell::Num),
                Cell::Num(r.objective),
                selected,
            ]);
        }
    }
    table.metadata = ctx.metadata(format!("optimize metric={}", metric_arg_name(metric)));
    Ok(table)
}

/// Optimized objectives for both modes across UAV x positions.
pub fn mode_map(ctx: &Context, metric: MetricArg, from: f64, to: f64, points: usize) -> Result<Table> {
    let xs = linspace(from, to, points)?;
    let metrics = metrics_for(metric);
    let mut columns = vec!["x_a".to_string()];
    for m in &metrics {
        let n = m.as_str().to_lowercase();
        for suffix in ["om", "dm", "hybrid", "selected"] {
            columns.push(format!("{n}_{suffix}"));
        }
    }
    let scenarios: Vec<Scenario> = xs.iter().map(|&x| variant(ctx, "alice.x", x)).collect::<Result<_>>()?;
    let decisions: Vec<Vec<ModeDecision>> = scenarios
        .par_iter()
        .map(|sc| metrics.iter().map(|&m| Ok(select_mode(sc, sc.alice, m)?)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let mut table = Table::new(columns);
    for (x, ds) in xs.iter().zip(&decisions) {
        let mut row = vec![Cell::Num(*x)];
        for d in ds {
            row.extend([
                Cell::Num(d.objective_om),
                Cell::Num(d.objective_dm),
                Cell::Num(d.hybrid()),
                d.indicator.as_str().into(),
            ]);
        }
        table.push(row);
    }
    table.metadata = ctx.metadata(format!(
        "mode-map metric={} from={from:e} to={to:e} points={points}",
        metric_arg_name(metric)
    ));
    Ok(table)
}

/// Reference validation grid.
pub const VALIDATE_X: [f64; 4] = [400.0, 1000.0, 1360.0, 2000.0];
pub const VALIDATE_P_DBM: [f64; 3] = [5.0, 15.0, 25.0];
pub const VALIDATE_RHO_DB: [f64; 2] = [2.0, 4.0];
pub const VALIDATE_RB: [f64; 3] = [0.5e6, 1e6, 2e6];
pub const MIN_VALIDATE_SAMPLES: u64 = 10_000;

pub struct ValidationReport {
    pub table: Table,
}

impl ValidationReport {
    pub fn failed(&self) -> usize {
        let col = self.table.column("pass").expect("pass column");
        self.table.rows.iter().filter(|r| r[col] != Cell::Bool(true)).count()
    }

    /// Rows whose `check` column equals `check`.
    pub fn rows_for<'a>(&'a self, check: &'a str) -> impl Iterator<Item = &'a Vec<Cell>> + 'a {
        let col = self.table.column("check").expect("check column");
        self.table.rows.iter().filter(move |r| r[col] == Cell::Text(check.to_string()))
    }
}

struct Cellspec {
    check: &'static str,
    mode: Mode,
    x: f64,
    p_dbm: f64,
    rho_db: f64,
    r_b: Option<f64>,
}

/// Closed forms against Monte Carlo on the reference grid: DEP and
/// capacity at every (mode, x, rho, p), outage additionally at every rate.
/// Probabilities pass within max(0.02, 3 standard errors); capacity within
/// max(5 %, 3 standard errors).
pub fn validate(ctx: &Context) -> Result<ValidationReport> {
    let n = ctx.samples.unwrap_or(1_000_000);
    if n < MIN_VALIDATE_SAMPLES {
        return Err(input_error(format!("validate needs at least {MIN_VALIDATE_SAMPLES} samples")));
    }
    let mut cells = Vec::new();
    for check in ["dep", "outage", "csc"] {
        for mode in Mode::BOTH {
            for x in VALIDATE_X {
                for rho_db in VALIDATE_RHO_DB {
                    for p_dbm in VALIDATE_P_DBM {
                        let rates: Vec<Option<f64>> = if check == "outage" {
                            VALIDATE_RB.iter().map(|&r| Some(r)).collect()
                        } else {
                            vec![None]
                        };
                        for r_b in rates {
                            cells.push(Cellspec { check, mode, x, p_dbm, rho_db, r_b });
                        }
                    }
                }
            }
        }
    }
    let mut table = Table::new(
        [
            "check",
            "mode",
            "x_a",
            "p_a_dbm",
            "rho_db",
            "r_b",
            "analytic",
            "mc",
            "mc_stderr",
            "gap",
            "tolerance",
            "pass",
        ]
        .map(String::from)
        .to_vec(),
    );
    let mut exact_dep = Vec::new();
    for (i, c) in cells.iter().enumerate() {
        let mut cfg = ctx.config.clone();
        cfg.set("alice.x", c.x).map_err(|e| input_error(e.to_string()))?;
        cfg.set("noise.rho_db", c.rho_db).map_err(|e| input_error(e.to_string()))?;
        let sc = cfg.resolve(true).map_err(|e| input_error(e.to_string()))?;
        let uav = sc.alice;
        let p = db_to_linear(c.p_dbm);
        let seed = derive_seed(ctx.seed, i as u64);
        let (analytic, est, rel) = match c.check {
            "dep" => {
                let est = mc_expected_min_dep(&sc, uav, p, c.mode, n, seed)?;
                exact_dep.push(est);
                (expected_min_dep(&sc, uav, p, c.mode)?.value, est, false)
            }
            "outage" => {
                let g = snr_threshold(c.r_b.expect("rate"), sc.band(c.mode).bandwidth);
                (
                    outage(&sc, uav, p, g, c.mode)?,
                    mc_outage(&sc, uav, p, g, c.mode, n, seed)?,
                    false,
                )
            }
            _ => (
                covert_capacity(&sc, uav, p, c.mode)?,
                mc_ergodic_capacity(&sc, uav, p, c.mode, n, seed)?,
                true,
            ),
        };
        let base = if rel { 0.05 * est.mean.abs() } else { 0.02 };
        let tol = base.max(3.0 * est.std_error);
        let gap = (analytic - est.mean).abs();
        table.push(row_for(c, analytic, est.mean, est.std_error, gap, tol));
    }
    if ctx.radiometer {
        // Finite-observation radiometer against the infinite-observation
        // limit (the exact-kernel Monte Carlo DEP from the cells above).
        let channels = (n / 1000).max(200);
        let dep_cells: Vec<&Cellspec> = cells.iter().filter(|c| c.check == "dep").collect();
        for (j, (c, exact)) in dep_cells.iter().zip(&exact_dep).enumerate() {
            let mut cfg = ctx.config.clone();
            cfg.set("alice.x", c.x).map_err(|e| input_error(e.to_string()))?;
            cfg.set("noise.rho_db", c.rho_db).map_err(|e| input_error(e.to_string()))?;
            let sc = cfg.resolve(true).map_err(|e| input_error(e.to_string()))?;
            let seed = derive_seed(ctx.seed, (cells.len() + j) as u64);
            let est = mc_radiometer_dep(
                &sc,
                sc.alice,
                db_to_linear(c.p_dbm),
                c.mode,
                RadiometerConfig::default(),
                channels,
                seed,
            )?;
            let se = est.std_error.hypot(exact.std_error);
            let tol = 0.02f64.max(3.0 * se);
            let gap = (exact.mean - est.mean).abs();
            let spec = Cellspec { check: "dep_radiometer", ..**c };
            table.push(row_for(&spec, exact.mean, est.mean, se, gap, tol));
        }
    }
    table.metadata = ctx.metadata(format!("validate samples={n} radiometer={}", ctx.radiometer));
    Ok(ValidationReport { table })
}

fn row_for(c: &Cellspec, analytic: f64, mc: f64, se: f64, gap: f64, tol: f64) -> Vec<Cell> {
    vec![
        c.check.into(),
        c.mode.as_str().into(),
        Cell::Num(c.x),
        Cell::Num(c.p_dbm),
        Cell::Num(c.rho_db),
        c.r_b.map_or(Cell::Empty, Cell::Num),
        Cell::Num(analytic),
        Cell::Num(mc),
        Cell::Num(se),
        Cell::Num(gap),
        Cell::Num(tol),
        (gap <= tol).into(),
    ]
}

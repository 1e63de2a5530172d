//! Subcommand implementations. Each returns a JSON summary for stdout and
//! writes its time series under `--out-dir`.

use std::fs::File;
use std::io::BufWriter;

use nalgebra::DVector;
use serde_json::{json, Value};
use wqed::collision::{run_conveyor, CollisionEngine, GaussianSource, Mode};
use wqed::dfree::{df_points, is_decoherence_free, phase_scan, PhaseTemplate, DEFAULT_TOL};
use wqed::geometry::CollectiveOps;
use wqed::master::{coefficient_table, MasterEquation, TABLE_KINDS};
use wqed::operator::{trace_norm, StateDM};
use wqed::trajectories::{ensemble_average, DetectionScheme, EnsembleOutput, KrausSchedule};
use wqed::Error;

use crate::output::{observable_header, observables, write_table, Table};
use crate::scenario::{self, Scenario};
use crate::{Common, Format};

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Io(std::io::Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl CliError {
    /// 2 for validation errors, 3 for numerical failures, 1 for i/o.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_validation() => 2,
            CliError::Core(_) => 3,
            CliError::Io(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(Error::InvalidArgument(_)) => "invalid_argument",
            CliError::Core(Error::InvalidLayout(_)) => "invalid_layout",
            CliError::Core(Error::DimensionMismatch { .. }) => "dimension_mismatch",
            CliError::Core(Error::Inadmissible(_)) => "inadmissible",
            CliError::Core(Error::CutoffTooSmall(_)) => "cutoff_too_small",
            CliError::Core(Error::InvalidState(_)) => "invalid_state",
            CliError::Core(Error::Numerical(_)) => "numerical",
            CliError::Io(_) => "io",
        }
    }
}

type Res<T> = Result<T, CliError>;

/// Scenario with command-line overrides applied.
struct Run {
    s: Scenario,
    args: Common,
    co: CollectiveOps,
}

impl Run {
    fn load(args: &Common) -> Res<Self> {
        let mut s = scenario::parse_file(&args.scenario)?;
        if let Some(dt) = args.dt {
            s.simulation.dt = dt;
        }
        if let Some(seed) = args.seed {
            s.simulation.seed = seed;
        }
        if let Some(n) = args.n_traj {
            s.simulation.n_traj = n;
        }
        if let Some(st) = args.stride {
            s.simulation.stride = st;
        }
        s.validate()?;
        let co = CollectiveOps::build(&s.layout()?)?;
        Ok(Run { s, args: args.clone(), co })
    }

    fn rho0(&self) -> Res<StateDM> {
        let psi = self.s.initial_vector(&self.s.layout()?)?;
        Ok(StateDM::from_pure(self.co.dims.clone(), &psi)?)
    }

    fn write(&self, stem: &str, table: &Table) -> Res<String> {
        Ok(write_table(&self.args.out_dir, stem, self.args.format, table)?.display().to_string())
    }

    fn series(&self, times: &[f64], states: &[StateDM]) -> Table {
        let mut header = vec!["t".to_string()];
        header.extend(observable_header(&self.co, &self.s.outputs));
        let rows = times
            .iter()
            .zip(states)
            .map(|(t, rho)| {
                let mut r = vec![*t];
                r.extend(observables(&self.co, &self.s.outputs, rho));
                r
            })
            .collect();
        Table { header, rows }
    }

    fn dump(&self, stem: &str, steps: &[u64], states: &[StateDM]) -> Res<Option<String>> {
        if !self.s.simulation.dump_states {
            return Ok(None);
        }
        std::fs::create_dir_all(&self.args.out_dir)?;
        let path = self.args.out_dir.join(format!("{stem}_states.bin"));
        let records: Vec<(u64, &nalgebra::DMatrix<num_complex::Complex64>)> = steps.iter().copied().zip(states.iter().map(StateDM::data)).collect();
        wqed::io::write_density_matrices(BufWriter::new(File::create(&path)?), self.co.dims.dims(), &records)?;
        Ok(Some(path.display().to_string()))
    }

    /// RK4 step no larger than the integrator's limit, dividing `dt` evenly.
    fn me_steps(&self, me: &MasterEquation, dt: f64) -> (f64, usize) {
        let k = (dt / me.max_step()).ceil().max(1.0) as usize;
        (dt / k as f64, k)
    }

    fn engine(&self, dt: f64) -> Res<CollisionEngine> {
        let cfg = self.s.collision_config(&self.s.layout()?, dt)?;
        Ok(CollisionEngine::new(&self.co, &cfg)?)
    }

    fn source(&self) -> Res<GaussianSource> {
        Ok(GaussianSource::new(self.s.field()?, self.s.simulation.bin_cutoff, self.s.mode())?)
    }

    fn ensemble(&self, dt: f64) -> Res<EnsembleOutput> {
        let engine = self.engine(dt)?;
        let mut src = self.source()?;
        let c = self.s.simulation.bin_cutoff;
        let scheme = match self.s.mode() {
            Mode::Unidirectional => DetectionScheme::photon_counting(c)?,
            Mode::Bidirectional => DetectionScheme::photon_counting_both(c)?,
        };
        let schedule = KrausSchedule::build(&engine, &mut src, &scheme)?;
        let psi: DVector<_> = self.s.initial_vector(&self.s.layout()?)?;
        let sim = &self.s.simulation;
        Ok(ensemble_average(&psi, &schedule, sim.n_traj, sim.seed, sim.stride, self.args.threads)?)
    }
}

pub fn run(command: &str, args: &Common) -> Res<Value> {
    let r = Run::load(args)?;
    let mut summary = match command {
        "me" => me(&r)?,
        "collide" => collide(&r)?,
        "traj" => traj(&r)?,
        "df-scan" => df_scan(&r)?,
        "coeffs" => coeffs(&r)?,
        "compare" => compare(&r)?,
        "check" => json!({ "scenario_json": serde_json::from_str::<Value>(&r.s.to_json()).expect("valid json") }),
        other => return Err(Error::InvalidArgument(format!("unknown command {other}")).into()),
    };
    summary["command"] = json!(command);
    if let Some(name) = &r.s.name {
        summary["scenario"] = json!(name);
    }
    Ok(summary)
}

fn me(r: &Run) -> Res<Value> {
    let sim = &r.s.simulation;
    let me = MasterEquation::new(&r.co, &r.s.field()?)?;
    let (h, k) = r.me_steps(&me, sim.dt);
    let out = me.integrate(&r.rho0()?, sim.t_end, h, sim.stride * k)?;
    let file = r.write("me", &r.series(&out.times, &out.states))?;
    let steps: Vec<u64> = out.times.iter().map(|t| (t / sim.dt).round() as u64).collect();
    let dump = r.dump("me", &steps, &out.states)?;
    Ok(json!({
        "output": file,
        "states": dump,
        "integrator_step": h,
        "max_trace_drift": out.max_trace_drift,
        "min_eigenvalue": out.min_eigenvalue,
        "warnings": out.warnings,
    }))
}

fn collide(r: &Run) -> Res<Value> {
    let sim = &r.s.simulation;
    let engine = r.engine(sim.dt)?;
    let mut src = r.source()?;
    let out = run_conveyor(&r.rho0()?, &mut src, &engine, sim.stride, false)?;
    let file = r.write("collide", &r.series(&out.times, &out.states))?;
    let steps: Vec<u64> = out.times.iter().map(|t| (t / sim.dt).round() as u64).collect();
    let dump = r.dump("collide", &steps, &out.states)?;
    Ok(json!({
        "output": file,
        "states": dump,
        "max_leakage": out.max_leakage,
        "leakage_flagged": out.leakage_flagged,
        "min_eigenvalue": out.min_eigenvalue,
        "warnings": out.warnings,
    }))
}

fn traj(r: &Run) -> Res<Value> {
    let sim = &r.s.simulation;
    let ens = r.ensemble(sim.dt)?;
    let d = r.co.dims.total();
    let mut table = r.series(&ens.times, &ens.mean);
    for k in 0..d {
        table.header.push(format!("p_{k}"));
        table.header.push(format!("p_{k}_stderr"));
    }
    for (row, (m, se)) in table.rows.iter_mut().zip(ens.mean.iter().zip(&ens.stderr)) {
        for k in 0..d {
            row.push(m.data()[(k, k)].re);
            row.push(se[(k, k)]);
        }
    }
    let file = r.write("traj", &table)?;
    let clicked = ens.first_click.iter().filter(|c| c.is_some()).count();
    Ok(json!({
        "output": file,
        "n_traj": ens.n_traj,
        "seed": sim.seed,
        "clicks_mean": ens.clicks_mean,
        "clicks_stderr": ens.clicks_stderr,
        "trajectories_with_click": clicked,
    }))
}

fn df_scan(r: &Run) -> Res<Value> {
    let layout = r.s.layout()?;
    let template = match &r.s.df_scan.coefficients {
        Some(c) => PhaseTemplate::new(layout, c.clone())?,
        None => PhaseTemplate::uniform(layout),
    };
    let scan = phase_scan(&template, r.s.df_scan.resolution, DEFAULT_TOL)?;
    let nf = template.n_free();
    let mut header: Vec<String> = (0..nf).map(|f| format!("theta_{f}")).collect();
    header.extend(["df", "hvac_norm", "hvac_zero"].map(String::from));
    let rows = scan
        .iter()
        .map(|p| {
            let mut row = p.phases.clone();
            row.extend([f64::from(u8::from(p.df)), p.hvac_norm, f64::from(u8::from(p.hvac_zero))]);
            row
        })
        .collect();
    let file = r.write("df-scan", &Table { header, rows })?;
    let points = df_points(&scan)
        .iter()
        .map(|p| {
            let layout = template.layout_at(&p.phases)?;
            let phis: Vec<f64> = layout.points().iter().map(|q| q.phi).collect();
            Ok(json!({ "phases": p.phases, "point_phases": phis, "hvac_norm": p.hvac_norm, "hvac_zero": p.hvac_zero }))
        })
        .collect::<Res<Vec<Value>>>()?;
    Ok(json!({ "output": file, "grid_points": scan.len(), "df_points": points }))
}

fn coeffs(r: &Run) -> Res<Value> {
    let table = coefficient_table(&r.co, &r.s.field()?)?;
    let n = table.n_emitters;
    std::fs::create_dir_all(&r.args.out_dir)?;
    let mut json_table = serde_json::Map::new();
    let mut lines = vec!["kind,i,j,re,im".to_string()];
    for kind in TABLE_KINDS {
        let m = table.matrix(kind);
        let rows: Vec<Vec<[f64; 2]>> = (0..n).map(|i| (0..n).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect();
        for i in 0..n {
            for j in 0..n {
                lines.push(format!("{kind},{i},{j},{},{}", wqed::io::fmt_f64(m[(i, j)].re), wqed::io::fmt_f64(m[(i, j)].im)));
            }
        }
        json_table.insert(kind.to_string(), json!(rows));
    }
    let path = match r.args.format {
        Format::Csv => {
            let p = r.args.out_dir.join("coeffs.csv");
            std::fs::write(&p, lines.join("\n") + "\n")?;
            p
        }
        Format::Json => {
            let p = r.args.out_dir.join("coeffs.json");
            std::fs::write(&p, serde_json::to_string_pretty(&json_table).expect("table serialises") + "\n")?;
            p
        }
    };
    let max_abs = |k: &str| table.matrix(k).iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(json!({
        "output": path.display().to_string(),
        "table": json_table,
        "max_dissipative": max_abs("decay").max(max_abs("heat")).max(max_abs("squeeze")),
        "decoherence_free": is_decoherence_free(&r.co, DEFAULT_TOL).df,
    }))
}

fn compare(r: &Run) -> Res<Value> {
    let sim = &r.s.simulation;
    let dts: Vec<f64> = match r.args.dt {
        Some(dt) => vec![4.0 * dt, 2.0 * dt, dt],
        None => r.s.compare.dts.clone(),
    };
    let finest = dts.iter().copied().fold(f64::INFINITY, f64::min);
    let rho0 = r.rho0()?;
    let me = MasterEquation::new(&r.co, &r.s.field()?)?;
    let (h, _) = r.me_steps(&me, finest);
    let reference = me.integrate(&rho0, sim.t_end, h, usize::MAX)?;
    let rho_ref = reference.states.last().expect("integrator records the final state");

    let mut rows = Vec::new();
    let mut prev: Option<f64> = None;
    for dt in &dts {
        let engine = r.engine(*dt)?;
        let mut src = r.source()?;
        let out = run_conveyor(&rho0, &mut src, &engine, usize::MAX, false)?;
        let t_reached = *out.times.last().expect("conveyor records the final state");
        if (t_reached - sim.t_end).abs() > 1e-9 * sim.t_end.max(1.0) {
            return Err(Error::InvalidArgument(format!("t_end {} is not a multiple of dt {dt}", sim.t_end)).into());
        }
        let d = trace_norm(&(out.states.last().expect("final state").data() - rho_ref.data()));
        rows.push(vec![*dt, d, prev.map_or(f64::NAN, |p| p / d)]);
        prev = Some(d);
    }
    let file = r.write("compare", &Table { header: vec!["dt".into(), "trace_norm_discrepancy".into(), "ratio".into()], rows: rows.clone() })?;
    let mut summary = json!({
        "output": file,
        "dts": dts,
        "discrepancies": rows.iter().map(|x| x[1]).collect::<Vec<_>>(),
        "ratios": rows.iter().skip(1).map(|x| x[2]).collect::<Vec<_>>(),
    });

    if r.s.compare.trajectories {
        let ens = r.ensemble(finest)?;
        let steps = (sim.stride as f64 * finest / h).round() as usize;
        let fine = me.integrate(&rho0, sim.t_end, h, steps.max(1))?;
        let d = r.co.dims.total();
        let mut worst: f64 = 0.0;
        for ((m, se), rho) in ens.mean.iter().zip(&ens.stderr).zip(&fine.states).skip(1) {
            for k in 0..d {
                let dev = (m.data()[(k, k)].re - rho.data()[(k, k)].re).abs();
                if se[(k, k)] > 0.0 {
                    worst = worst.max(dev / se[(k, k)]);
                } else if dev > 1e-12 {
                    worst = f64::INFINITY;
                }
            }
        }
        summary["trajectories"] = json!({ "n_traj": ens.n_traj, "max_population_deviation_in_stderr": worst });
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::from(Error::Numerical("negative eigenvalue".into())).exit_code(), 3);
        assert_eq!(CliError::from(Error::CutoffTooSmall("x".into())).exit_code(), 2);
        assert_eq!(CliError::from(Error::DimensionMismatch { expected: 2, found: 3 }).kind(), "dimension_mismatch");
        assert_eq!(CliError::from(std::io::Error::other("disk")).exit_code(), 1);
    }
}

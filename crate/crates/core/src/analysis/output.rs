//! Files written by each experiment: one CSV per series, a JSON summary and
//! optional SVG plots.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use super::config::RunConfig;
use super::experiments::{
    FloquetResult, MultistepResult, OatScaling, ScalingResult, SemiclassicalResult, Simulation, SmResult, ThetaScan,
};
use crate::error::Result;
use crate::error_models::CorrectedSqueezing;
use crate::measurement::SqueezingRecord;
use crate::plot::{line_plot, Series};

pub struct OutputDir {
    dir: PathBuf,
    svg: bool,
}

impl OutputDir {
    pub fn create<P: AsRef<Path>>(dir: P, svg: bool) -> Result<Self> {
        std::fs::create_dir_all(dir.as_ref())?;
        Ok(Self { dir: dir.as_ref().to_path_buf(), svg })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn csv<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<PathBuf> {
        let p = self.path(name);
        let mut w = csv::Writer::from_path(&p)?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(p)
    }

    pub fn json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let p = self.path(name);
        std::fs::write(&p, serde_json::to_string_pretty(value)?)?;
        Ok(p)
    }

    /// Written only when SVG output is enabled.
    pub fn svg(&self, name: &str, content: impl FnOnce() -> String) -> Result<Option<PathBuf>> {
        if !self.svg {
            return Ok(None);
        }
        let p = self.path(name);
        std::fs::write(&p, content())?;
        Ok(Some(p))
    }
}

/// Summary header shared by every experiment.
pub fn summary(cfg: &RunConfig, experiment: &str, body: Value) -> Value {
    json!({
        "experiment": experiment,
        "crate_version": env!("CARGO_PKG_VERSION"),
        "config_version": cfg.version,
        "seed": cfg.seed,
        "config": cfg,
        "results": body,
    })
}

fn xi2_db_series(label: &str, recs: &[SqueezingRecord]) -> Series {
    Series::new(label, recs.iter().filter(|r| r.xi2.is_finite()).map(|r| [r.t_us, r.xi2_db]).collect())
}

pub fn write_simulation(out: &OutputDir, cfg: &RunConfig, sim: &Simulation) -> Result<()> {
    out.csv("simulate.csv", &sim.rows)?;
    if let Some(p) = &sim.shots_at_optimum {
        p.spin_length.write_csv(out.path("shots_spin_length.csv"))?;
        p.variance.write_csv(out.path("shots_variance.csv"))?;
    }
    out.json(
        "summary.json",
        &summary(cfg, "simulate", json!({ "n_atoms": sim.n_imaged, "optima": sim.optima, "holes": sim.holes })),
    )?;
    out.svg("simulate.svg", || {
        let col = |f: &dyn Fn(&super::experiments::SimRow) -> Option<f64>| -> Vec<[f64; 2]> {
            sim.rows.iter().filter_map(|r| f(r).map(|v| [r.t_us, v])).collect()
        };
        let mut s = vec![
            Series::new("ideal", col(&|r| Some(r.xi2_db))),
            Series::new("raw", col(&|r| Some(r.raw_xi2_db))),
            Series::new("corrected", col(&|r| Some(r.corr_xi2_db))),
        ];
        if cfg.shots > 0 {
            s.push(Series::new("shots raw", col(&|r| r.shot_raw_xi2_db)).dashed());
        }
        s.push(Series::new("SQL", vec![[sim.rows[0].t_us, 0.0], [sim.rows[sim.rows.len() - 1].t_us, 0.0]]).dashed());
        line_plot("squeezing", "t (us)", "xi^2 (dB)", &s)
    })?;
    Ok(())
}

pub fn write_theta_scan(out: &OutputDir, cfg: &RunConfig, scan: &ThetaScan) -> Result<()> {
    out.csv("theta_scan.csv", &scan.rows)?;
    out.json(
        "summary.json",
        &summary(
            cfg,
            "theta-scan",
            json!({ "t_us": scan.t_us, "fit": scan.fit, "exact_theta_star": scan.exact_theta_star }),
        ),
    )?;
    out.svg("theta_scan.svg", || {
        let fit: Vec<[f64; 2]> = (0..=200)
            .map(|k| {
                let th = -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * k as f64 / 200.0;
                [th, 4.0 * scan.fit.eval(th) / scan.n_atoms as f64]
            })
            .collect();
        line_plot(
            "variance vs analysis angle",
            "theta (rad)",
            "4 Var / N",
            &[
                Series::new("data", scan.rows.iter().map(|r| [r.theta, r.var_norm]).collect()),
                Series::new("fit", fit),
                Series::new("uncorrelated", scan.rows.iter().map(|r| [r.theta, r.reference]).collect()).dashed(),
            ],
        )
    })?;
    Ok(())
}

pub fn write_floquet(out: &OutputDir, cfg: &RunConfig, f: &FloquetResult) -> Result<()> {
    for s in &f.series {
        out.csv(&format!("floquet_n{}.csv", s.n_cycles), &s.records)?;
    }
    if let Some(r) = &f.reference {
        out.csv(&format!("floquet_reference_n{}.csv", r.n_cycles), &r.records)?;
    }
    let durations: Vec<Value> =
        f.series.iter().map(|s| json!({ "n_cycles": s.n_cycles, "squeezed_duration_us": s.squeezed_duration_us, "censored": s.censored })).collect();
    out.json(
        "summary.json",
        &summary(
            cfg,
            "floquet",
            json!({ "t_start_us": f.t_start_us, "period_us": f.period_us, "durations": durations, "cycle": f.diagnostics }),
        ),
    )?;
    out.svg("floquet.svg", || {
        let mut s: Vec<Series> =
            f.series.iter().map(|s| xi2_db_series(&format!("n = {}", s.n_cycles), &s.records)).collect();
        if let Some(r) = &f.reference {
            s.push(xi2_db_series("average H", &r.records).dashed());
        }
        line_plot("Floquet freezing", "t (us)", "xi^2 (dB)", &s)
    })?;
    Ok(())
}

pub fn write_multistep(out: &OutputDir, cfg: &RunConfig, m: &MultistepResult) -> Result<()> {
    out.csv("single_step.csv", &m.single)?;
    out.csv("multi_step.csv", &m.multi)?;
    out.json(
        "summary.json",
        &summary(
            cfg,
            "multistep",
            json!({
                "t_rotate_us": m.t_rotate_us,
                "angle_rad": m.angle_rad,
                "estimated_angle": m.estimated_angle,
                "single_optimum": m.single_optimum,
                "multi_optimum": m.multi_optimum,
                "flags": m.flags,
            }),
        ),
    )?;
    out.svg("multistep.svg", || {
        line_plot(
            "multi-step protocol",
            "t (us)",
            "xi^2 (dB)",
            &[xi2_db_series("single", &m.single), xi2_db_series("multi", &m.multi)],
        )
    })?;
    Ok(())
}

pub fn write_scaling(out: &OutputDir, cfg: &RunConfig, s: &ScalingResult) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        rows: usize,
        cols: usize,
        n_atoms: usize,
        xi2: Option<f64>,
        xi2_db: Option<f64>,
        t_us: Option<f64>,
        raw_xi2: Option<f64>,
        raw_t_us: Option<f64>,
        corr_xi2: Option<f64>,
        corr_t_us: Option<f64>,
    }
    let rows: Vec<Row> = s
        .sizes
        .iter()
        .map(|r| Row {
            rows: r.rows,
            cols: r.cols,
            n_atoms: r.n_atoms,
            xi2: r.exact.map(|o| o.xi2),
            xi2_db: r.exact.map(|o| o.xi2_db),
            t_us: r.exact.map(|o| o.t_us),
            raw_xi2: r.raw.map(|o| o.xi2),
            raw_t_us: r.raw.map(|o| o.t_us),
            corr_xi2: r.corrected.map(|o| o.xi2),
            corr_t_us: r.corrected.map(|o| o.t_us),
        })
        .collect();
    out.csv("scaling.csv", &rows)?;
    out.json("summary.json", &summary(cfg, "scaling", serde_json::to_value(s)?))?;
    out.svg("scaling.svg", || {
        let pts = |f: &dyn Fn(&Row) -> Option<f64>| -> Vec<[f64; 2]> {
            rows.iter().filter_map(|r| f(r).map(|v| [(r.n_atoms as f64).ln(), v.ln()])).collect()
        };
        line_plot(
            "optimal squeezing vs N",
            "ln N",
            "ln xi^2*",
            &[
                Series::new("ideal", pts(&|r| r.xi2)),
                Series::new("raw", pts(&|r| r.raw_xi2)),
                Series::new("corrected", pts(&|r| r.corr_xi2)),
            ],
        )
    })?;
    Ok(())
}

pub fn write_oat(out: &OutputDir, cfg: &RunConfig, o: &OatScaling) -> Result<()> {
    out.csv("oat.csv", &o.rows)?;
    out.json("summary.json", &summary(cfg, "oat", json!({ "fit": o.fit, "chi_n_mhz": cfg.oat.chi_n_mhz })))?;
    out.svg("oat.svg", || {
        let ln = |f: &dyn Fn(&super::experiments::OatRow) -> f64| -> Vec<[f64; 2]> {
            o.rows.iter().map(|r| [(r.n_atoms as f64).ln(), f(r).ln()]).collect()
        };
        line_plot(
            "one-axis twisting",
            "ln N",
            "ln value",
            &[
                Series::new("xi^2*", ln(&|r| r.xi2)),
                Series::new("t* (us)", ln(&|r| r.t_us)),
                Series::new("2/(2+N)", ln(&|r| r.quantum_bound)).dashed(),
            ],
        )
    })?;
    Ok(())
}

pub fn write_sm(out: &OutputDir, cfg: &RunConfig, s: &SmResult) -> Result<()> {
    #[derive(Serialize)]
    struct CurveRow {
        k: usize,
        mean_fraction: f64,
        var_norm: f64,
    }
    let rows: Vec<CurveRow> = s
        .curves
        .iter()
        .flat_map(|c| c.points.iter().map(|p| CurveRow { k: c.k, mean_fraction: p[0], var_norm: p[1] }))
        .collect();
    out.csv("sm_curves.csv", &rows)?;
    out.csv("sm_trajectory.csv", &s.trajectory)?;
    let witnessed = s.trajectory.iter().filter_map(|p| p.depth_exceeds).max();
    out.json("summary.json", &summary(cfg, "sm-bounds", json!({ "ks": cfg.sm.ks, "max_depth_exceeded": witnessed })))?;
    out.svg("sm_bounds.svg", || {
        let mut series: Vec<Series> =
            s.curves.iter().map(|c| Series::new(format!("k = {}", c.k), c.points.clone())).collect();
        series.push(
            Series::new("trajectory", s.trajectory.iter().map(|p| [p.mean_fraction, p.var_norm]).collect()).dashed(),
        );
        line_plot("entanglement depth bounds", "2|<J>|/N", "4 Var/N", &series)
    })?;
    Ok(())
}

pub fn write_semiclassical(out: &OutputDir, cfg: &RunConfig, r: &SemiclassicalResult) -> Result<()> {
    out.csv("semiclassical_single.csv", &r.single)?;
    out.csv("semiclassical_multi.csv", &r.multi)?;
    for (k, (t, e)) in r.snapshots.iter().enumerate() {
        e.write_csv(out.path(&format!("cloud_{k}.csv")))?;
        out.svg(&format!("cloud_{k}.svg"), || e.svg(&format!("t = {t} us")))?;
    }
    out.json(
        "summary.json",
        &summary(
            cfg,
            "semiclassical",
            json!({
                "n_atoms": r.n_atoms,
                "chi_mhz": r.chi_mhz,
                "j_tilde": r.j_tilde,
                "t_rotate_us": r.t_rotate_us,
                "angle_rad": r.angle_rad,
                "single_optimum": r.single_optimum,
                "multi_optimum": r.multi_optimum,
                "snapshot_times_us": r.snapshots.iter().map(|s| s.0).collect::<Vec<_>>(),
                "flags": r.flags,
            }),
        ),
    )?;
    out.svg("semiclassical.svg", || {
        let pts = |rows: &[super::experiments::ScRow]| rows.iter().map(|r| [r.t_us, r.xi2_proxy_db]).collect();
        line_plot(
            "classical twisting",
            "t (us)",
            "4 min Var / N (dB)",
            &[Series::new("single", pts(&r.single)), Series::new("multi", pts(&r.multi))],
        )
    })?;
    Ok(())
}

pub fn write_correction(out: &OutputDir, cfg: &RunConfig, c: &CorrectedSqueezing) -> Result<()> {
    out.csv("corrected.csv", std::slice::from_ref(c))?;
    out.json("summary.json", &summary(cfg, "correct", serde_json::to_value(c)?))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::config::TimeGrid;
    use crate::analysis::experiments::simulate;
    use crate::krylov::KrylovParams;
    use crate::lattice::LatticeSpec;
    use crate::measurement::to_db;

    fn run(dir: &Path, seed: u64) -> String {
        let mut c = RunConfig {
            seed,
            lattice: LatticeSpec::square(2, 2, 15.0),
            time: TimeGrid::uniform(0.0, 0.8, 0.05),
            krylov: KrylovParams::default().with_step(0.05),
            ..RunConfig::default()
        };
        c.shots = 100;
        c.realizations = 2;
        c.errors.eta = 0.2;
        let out = OutputDir::create(dir, true).unwrap();
        write_simulation(&out, &c, &simulate(&c).unwrap()).unwrap();
        std::fs::read_to_string(dir.join("simulate.csv")).unwrap()
    }

    #[test]
    fn outputs_are_deterministic_and_consistent() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let text = run(a.path(), 9);
        assert_eq!(text, run(b.path(), 9));
        assert!(a.path().join("summary.json").exists() && a.path().join("simulate.svg").exists());
        // every dB column matches its linear column
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let h = r.headers().unwrap().clone();
        let col = |name: &str| h.iter().position(|c| c == name).unwrap();
        for rec in r.records() {
            let rec = rec.unwrap();
            for base in ["xi2", "raw_xi2", "corr_xi2", "shot_raw_xi2", "shot_corr_xi2"] {
                let x: f64 = rec[col(base)].parse().unwrap();
                let db: f64 = rec[col(&format!("{base}_db"))].parse().unwrap();
                assert!((db - to_db(x)).abs() < 1e-12 || (x <= 0.0 && db.is_nan()));
            }
        }
        let v: Value = serde_json::from_str(&std::fs::read_to_string(a.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(v["seed"], 9);
    }
}

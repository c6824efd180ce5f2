//! Stage runner: data generation, pretraining, obstacle perception, RL and
//! sensitivity maps, each persisting artifacts the next stage reads back.

use std::fs;
use std::path::{Path, PathBuf};

use super::config::RunConfig;
use super::svg::{line_plot, polar_heatmap, Series};
use super::validation::csv_err;
use crate::env::{Dataset, Environment, MotionKind};
use crate::error::{Error, Result};
use crate::nn::{checkpoint, ParameterSet};
use crate::perception::sensitivity::windows_from;
use crate::perception::train::{label_ends, LABEL_LAG};
use crate::perception::{
    entropy, fit_norm_to_dataset, init_obstacle_model, init_perception, predict_obstacle, pretrain,
    sensitivity_map, train_obstacle, SENSORS, WINDOW,
};
use crate::rl::{train_rl, Agent, RlRun};

/// Initializations compared downstream of pretraining.
pub const ARMS: [&str; 2] = ["pretrained", "random"];

/// Held-out obstacle motions, each recorded with its own seed offset.
pub fn test_motions() -> [(&'static str, MotionKind); 4] {
    [
        ("random-waypoint", MotionKind::random_waypoint()),
        ("intermittent", MotionKind::intermittent()),
        ("one-sided-sine", MotionKind::one_sided_sine()),
        ("still", MotionKind::Still),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    GenData,
    Pretrain,
    TrainObstacle,
    EvalObstacle,
    TrainRl,
    Sensitivity,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::GenData,
        Stage::Pretrain,
        Stage::TrainObstacle,
        Stage::EvalObstacle,
        Stage::TrainRl,
        Stage::Sensitivity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::GenData => "gen-data",
            Stage::Pretrain => "pretrain",
            Stage::TrainObstacle => "train-obstacle",
            Stage::EvalObstacle => "eval-obstacle",
            Stage::TrainRl => "train-rl",
            Stage::Sensitivity => "sensitivity",
        }
    }

    /// Artifact written last by the stage; its presence marks completion.
    pub fn marker(self) -> &'static str {
        match self {
            Stage::GenData => "data/test-still.fsd",
            Stage::Pretrain => "pretrain/params.ckpt",
            Stage::TrainObstacle => "obstacle/summary.csv",
            Stage::EvalObstacle => "obstacle/eval-random-still.csv",
            Stage::TrainRl => "rl/summary-random.csv",
            Stage::Sensitivity => "sensitivity/entropy.csv",
        }
    }
}

/// Write a CSV table with the given header.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Numeric CSV table: header and rows parsed as `f64`.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| {
                    Error::Format(format!("{}: non-numeric field {f:?}", path.display()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

fn column(header: &[String], name: &str, path: &Path) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Format(format!("{} has no column `{name}`", path.display())))
}

fn num(v: impl ToString) -> String {
    v.to_string()
}

/// Sensor angle `theta_j` and its direction in standard axes (sensor 0
/// faces upstream, indices advance over the top).
pub fn sensor_angles() -> (Vec<f64>, Vec<f64>) {
    let theta: Vec<f64> = (0..SENSORS)
        .map(|j| 2.0 * std::f64::consts::PI * j as f64 / SENSORS as f64)
        .collect();
    let phi = theta.iter().map(|t| std::f64::consts::PI - t).collect();
    (theta, phi)
}

/// Share of a sensitivity map on the upstream half of the cylinder.
pub fn upstream_share(map: &[f64]) -> f64 {
    let (_, phi) = sensor_angles();
    map.iter()
        .zip(&phi)
        .filter(|(_, p)| p.cos() < 0.0)
        .map(|(s, _)| s)
        .sum()
}

pub struct Pipeline {
    pub config: RunConfig,
    pub root: PathBuf,
}

impl Pipeline {
    /// Validate the config, create the output root and write the resolved
    /// config beside the outputs.
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let root = config.output_root();
        fs::create_dir_all(&root)?;
        fs::write(root.join("config.toml"), config.to_toml())?;
        Ok(Self { config, root })
    }

    /// Attach to an existing output root without rewriting its config.
    pub fn open(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let root = config.output_root();
        Ok(Self { config, root })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Path of an upstream artifact, or an error naming the stage to rerun.
    pub fn require(&self, rel: &str, stage: Stage) -> Result<PathBuf> {
        let p = self.path(rel);
        if p.exists() {
            Ok(p)
        } else {
            Err(Error::MissingArtifact {
                artifact: p.display().to_string(),
                stage: stage.name().to_string(),
            })
        }
    }

    pub fn is_done(&self, stage: Stage) -> bool {
        self.path(stage.marker()).exists()
    }

    pub fn run(&self, stage: Stage) -> Result<()> {
        log::info!("stage {}", stage.name());
        match stage {
            Stage::GenData => self.gen_data(),
            Stage::Pretrain => self.pretrain(),
            Stage::TrainObstacle => self.train_obstacle(),
            Stage::EvalObstacle => self.eval_obstacle(),
            Stage::TrainRl => self.train_rl(),
            Stage::Sensitivity => self.sensitivity(),
        }
    }

    /// Every stage in order. With `resume`, stages whose outputs already
    /// exist are skipped.
    pub fn run_all(&self, resume: bool) -> Result<()> {
        for stage in Stage::ALL {
            if resume && self.is_done(stage) {
                log::info!("stage {} already complete", stage.name());
                continue;
            }
            self.run(stage)?;
        }
        Ok(())
    }

    fn record(&self, kind: MotionKind, seed: u64, duration: f64) -> Result<Dataset> {
        Environment::new(self.config.env_config(kind, seed))?.record_dataset(duration)
    }

    pub fn gen_data(&self) -> Result<()> {
        let c = &self.config;
        let train = self.record(
            c.environment.train_motion,
            c.seed,
            c.environment.train_duration,
        )?;
        train.save(&self.path("data/train.fsd"))?;
        for (k, (name, kind)) in test_motions().into_iter().enumerate() {
            let seed = c.seed + 1000 * (k as u64 + 1);
            let data = self.record(kind, seed, c.environment.test_duration)?;
            data.save(&self.path(&format!("data/test-{name}.fsd")))?;
        }
        Ok(())
    }

    fn train_data(&self) -> Result<Dataset> {
        Dataset::load(&self.require("data/train.fsd", Stage::GenData)?)
    }

    fn test_data(&self) -> Result<Vec<(&'static str, Dataset)>> {
        test_motions()
            .into_iter()
            .map(|(name, _)| {
                let p = self.require(&format!("data/test-{name}.fsd"), Stage::GenData)?;
                Ok((name, Dataset::load(&p)?))
            })
            .collect()
    }

    fn pretrained(&self) -> Result<ParameterSet<f32>> {
        checkpoint::load(&self.require("pretrain/params.ckpt", Stage::Pretrain)?)
    }

    pub fn pretrain(&self) -> Result<()> {
        let train = self.train_data()?;
        let r = pretrain(&train, &self.config.perception.pretrain, self.config.seed)?;
        let rows: Vec<Vec<String>> = r
            .curve
            .iter()
            .map(|e| vec![num(e.epoch), num(e.train), num(e.val)])
            .collect();
        write_table(
            &self.path("pretrain/loss.csv"),
            &["epoch", "train", "val"],
            &rows,
        )?;
        self.render_pretrain_loss(&self.path("pretrain/loss.svg"))?;
        checkpoint::save(&r.params, &self.path("pretrain/params.ckpt"))
    }

    fn render_pretrain_loss(&self, out: &Path) -> Result<()> {
        let src = self.require("pretrain/loss.csv", Stage::Pretrain)?;
        let (h, rows) = read_table(&src)?;
        let (e, tr, va) = (
            column(&h, "epoch", &src)?,
            column(&h, "train", &src)?,
            column(&h, "val", &src)?,
        );
        let series = [
            Series::new("train", rows.iter().map(|r| (r[e], r[tr])).collect()),
            Series::new("validation", rows.iter().map(|r| (r[e], r[va])).collect()),
        ];
        fs::write(
            out,
            line_plot("Predictive pretraining loss", "epoch", "loss", &series),
        )?;
        Ok(())
    }

    pub fn train_obstacle(&self) -> Result<()> {
        let c = &self.config;
        let train = self.train_data()?;
        let tests = self.test_data()?;
        let pre = self.pretrained()?;
        let refs: Vec<&Dataset> = tests.iter().map(|(_, d)| d).collect();
        let names: Vec<&str> = tests.iter().map(|(n, _)| *n).collect();
        let mut summary = Vec::new();
        for arm in ARMS {
            let init = if arm == "pretrained" {
                init_obstacle_model(Some(&pre), c.seed)?
            } else {
                let mut p = init_obstacle_model(None, c.seed)?;
                fit_norm_to_dataset(&mut p, &train, train.len())?;
                p
            };
            let r = train_obstacle(&train, &refs, init, &c.perception.obstacle, c.seed)?;
            let mut header = vec!["step", "train_mse"];
            header.extend(&names);
            header.push("average");
            let rows: Vec<Vec<String>> = r
                .curve
                .iter()
                .map(|e| {
                    let mut row = vec![num(e.step), num(e.train_mse)];
                    row.extend(e.test_mse.iter().map(num));
                    row.push(num(e.average));
                    row
                })
                .collect();
            write_table(
                &self.path(&format!("obstacle/curve-{arm}.csv")),
                &header,
                &rows,
            )?;
            checkpoint::save(&r.params, &self.path(&format!("obstacle/{arm}.ckpt")))?;
            log::info!(
                "obstacle {arm}: best average test MSE {:.4} at step {}",
                r.best.average,
                r.best.step
            );
            let mut row = vec![arm.to_string(), num(r.best.step)];
            row.extend(r.best.test_mse.iter().map(num));
            row.push(num(r.best.average));
            summary.push(row);
        }
        self.render_obstacle_curve(&self.path("obstacle/curve.svg"))?;
        let mut header = vec!["arm", "best_step"];
        header.extend(&names);
        header.push("average");
        write_table(&self.path("obstacle/summary.csv"), &header, &summary)
    }

    fn render_obstacle_curve(&self, out: &Path) -> Result<()> {
        let mut series = Vec::new();
        for arm in ARMS {
            let src = self.require(&format!("obstacle/curve-{arm}.csv"), Stage::TrainObstacle)?;
            let (h, rows) = read_table(&src)?;
            let (s, a) = (column(&h, "step", &src)?, column(&h, "average", &src)?);
            series.push(Series::new(
                arm,
                rows.iter().map(|r| (r[s], r[a])).collect(),
            ));
        }
        fs::write(
            out,
            line_plot(
                "Obstacle position: average test MSE",
                "step",
                "MSE",
                &series,
            ),
        )?;
        Ok(())
    }

    pub fn eval_obstacle(&self) -> Result<()> {
        let tests = self.test_data()?;
        for arm in ARMS {
            let params = checkpoint::load(
                &self.require(&format!("obstacle/{arm}.ckpt"), Stage::TrainObstacle)?,
            )?;
            for (name, data) in &tests {
                let ends = label_ends(data, 1);
                let pred = predict_obstacle(&params, data, &ends)?;
                let rows: Vec<Vec<String>> = ends
                    .iter()
                    .zip(&pred)
                    .map(|(&e, p)| {
                        let label = &data.records[e - LABEL_LAG];
                        vec![num(label.t), num(label.y_obstacle), num(p)]
                    })
                    .collect();
                write_table(
                    &self.path(&format!("obstacle/eval-{arm}-{name}.csv")),
                    &["t", "y_true", "y_pred"],
                    &rows,
                )?;
            }
        }
        for (name, _) in &tests {
            self.render_obstacle_eval(name, &self.path(&format!("obstacle/eval-{name}.svg")))?;
        }
        Ok(())
    }

    fn render_obstacle_eval(&self, test: &str, out: &Path) -> Result<()> {
        let mut series = Vec::new();
        for arm in ARMS {
            let src = self.require(
                &format!("obstacle/eval-{arm}-{test}.csv"),
                Stage::EvalObstacle,
            )?;
            let (h, rows) = read_table(&src)?;
            let (t, yt, yp) = (
                column(&h, "t", &src)?,
                column(&h, "y_true", &src)?,
                column(&h, "y_pred", &src)?,
            );
            if series.is_empty() {
                series.push(Series::new(
                    "true",
                    rows.iter().map(|r| (r[t], r[yt])).collect(),
                ));
            }
            series.push(Series::new(
                arm,
                rows.iter().map(|r| (r[t], r[yp])).collect(),
            ));
        }
        let title = format!("Obstacle trajectory ({test})");
        fs::write(out, line_plot(&title, "t", "y / D", &series))?;
        Ok(())
    }

    fn agent_for(
        &self,
        arm: &str,
        seed: u64,
        pre: &ParameterSet<f32>,
        train: &Dataset,
    ) -> Result<Agent> {
        if arm == "pretrained" {
            return Agent::new(Some(pre), seed);
        }
        let mut agent = Agent::new(None, seed)?;
        fit_norm_to_dataset(&mut agent.policy, train, train.len())?;
        fit_norm_to_dataset(&mut agent.value, train, train.len())?;
        Ok(agent)
    }

    fn rl_run(&self, arm: &str, seed: u64, agent: Agent) -> Result<RlRun> {
        let c = &self.config;
        let mut env = Environment::new(c.rl_env_config(seed))?;
        let dir = self.path(&format!("rl/{arm}-seed{seed}"));
        fs::create_dir_all(&dir)?;
        let mut save = |episode: usize, agent: &Agent| {
            checkpoint::save(
                &agent.to_params(),
                &dir.join(format!("episode{episode:04}.ckpt")),
            )
        };
        train_rl(&mut env, agent, &c.rl.ppo, c.rl.episodes, seed, &mut save)
    }

    pub fn train_rl(&self) -> Result<()> {
        let c = &self.config;
        let pre = self.pretrained()?;
        let train = self.train_data()?;
        let seeds: Vec<u64> = (0..c.rl.seeds as u64).map(|s| c.seed + s).collect();
        for arm in ARMS {
            let agents = seeds
                .iter()
                .map(|&s| self.agent_for(arm, s, &pre, &train))
                .collect::<Result<Vec<_>>>()?;
            let runs: Vec<Result<RlRun>> = std::thread::scope(|scope| {
                let handles: Vec<_> = seeds
                    .iter()
                    .zip(agents)
                    .map(|(&s, agent)| scope.spawn(move || self.rl_run(arm, s, agent)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| {
                        h.join()
                            .unwrap_or_else(|_| Err(Error::State("RL worker panicked".into())))
                    })
                    .collect()
            });
            let mut curves = Vec::new();
            for (&seed, run) in seeds.iter().zip(runs) {
                let run = run?;
                self.write_rl_run(arm, seed, &run)?;
                curves.push(run.episodes.iter().map(|e| e.mean_cd).collect::<Vec<f64>>());
            }
            let rows: Vec<Vec<String>> = (0..c.rl.episodes)
                .map(|e| {
                    let xs: Vec<f64> = curves
                        .iter()
                        .map(|cv| cv[e])
                        .filter(|v| v.is_finite())
                        .collect();
                    let n = xs.len().max(1) as f64;
                    let mean = xs.iter().sum::<f64>() / n;
                    let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
                    vec![num(e), num(mean), num(std)]
                })
                .collect();
            write_table(
                &self.path(&format!("rl/summary-{arm}.csv")),
                &["episode", "mean", "std"],
                &rows,
            )?;
        }
        self.render_learning_curve(&self.path("rl/learning-curve.svg"))
    }

    fn write_rl_run(&self, arm: &str, seed: u64, run: &RlRun) -> Result<()> {
        let rows: Vec<Vec<String>> = run
            .episodes
            .iter()
            .map(|e| {
                vec![
                    num(e.episode),
                    num(seed),
                    num(e.mean_cd),
                    num(e.reward),
                    num(e.stats.clip_fraction),
                ]
            })
            .collect();
        write_table(
            &self.path(&format!("rl/curve-{arm}-seed{seed}.csv")),
            &["episode", "seed", "mean_cd", "reward", "clip_fraction"],
            &rows,
        )?;
        let rows: Vec<Vec<String>> = run
            .actions
            .iter()
            .map(|a| {
                vec![
                    num(a.episode),
                    num(a.index),
                    num(a.a_pos),
                    num(a.a_vel),
                    num(a.y_before),
                    num(a.y_after),
                    num(a.reward),
                    num(a.mean_cd),
                ]
            })
            .collect();
        write_table(
            &self.path(&format!("rl/actions-{arm}-seed{seed}.csv")),
            &[
                "episode", "index", "a_pos", "a_vel", "y_before", "y_after", "reward", "mean_cd",
            ],
            &rows,
        )
    }

    fn render_learning_curve(&self, out: &Path) -> Result<()> {
        let mut series = Vec::new();
        for arm in ARMS {
            let src = self.require(&format!("rl/summary-{arm}.csv"), Stage::TrainRl)?;
            let (h, rows) = read_table(&src)?;
            let (e, m) = (column(&h, "episode", &src)?, column(&h, "mean", &src)?);
            series.push(Series::new(
                arm,
                rows.iter().map(|r| (r[e], r[m])).collect(),
            ));
        }
        fs::write(
            out,
            line_plot("Agent drag over training", "episode", "mean C_D", &series),
        )?;
        Ok(())
    }

    /// Evenly spaced window ends over a dataset.
    fn sensitivity_windows(&self, data: &Dataset) -> Result<Vec<Vec<f32>>> {
        let n = self.config.perception.sensitivity_windows;
        let first = WINDOW - 1;
        let span = data.len().saturating_sub(first + 1);
        let ends: Vec<usize> = (0..n).map(|k| first + k * span / n.max(1)).collect();
        windows_from(data, &ends)
    }

    pub fn sensitivity(&self) -> Result<()> {
        let c = &self.config;
        let train = self.train_data()?;
        let tests = self.test_data()?;
        let windows = self.sensitivity_windows(&tests[0].1)?;
        let mut random = init_perception(c.seed)?;
        fit_norm_to_dataset(&mut random, &train, train.len())?;
        let (theta, _) = sensor_angles();
        let mut rows = Vec::new();
        for (name, params) in [("pretrained", self.pretrained()?), ("random", random)] {
            let map = sensitivity_map(&params, "", &windows)?;
            let table: Vec<Vec<String>> = theta
                .iter()
                .zip(&map)
                .map(|(t, s)| vec![num(t), num(s)])
                .collect();
            write_table(
                &self.path(&format!("sensitivity/{name}.csv")),
                &["theta", "s"],
                &table,
            )?;
            self.render_sensitivity(name, &self.path(&format!("sensitivity/{name}.svg")))?;
            let h = entropy(&map);
            log::info!(
                "sensitivity {name}: entropy {h:.4}, upstream share {:.3}",
                upstream_share(&map)
            );
            rows.push(vec![name.to_string(), num(h), num(upstream_share(&map))]);
        }
        write_table(
            &self.path("sensitivity/entropy.csv"),
            &["arm", "entropy", "upstream_share"],
            &rows,
        )
    }

    fn render_sensitivity(&self, name: &str, out: &Path) -> Result<()> {
        let src = self.require(&format!("sensitivity/{name}.csv"), Stage::Sensitivity)?;
        let (h, rows) = read_table(&src)?;
        let (t, s) = (column(&h, "theta", &src)?, column(&h, "s", &src)?);
        let phi: Vec<f64> = rows.iter().map(|r| std::f64::consts::PI - r[t]).collect();
        let vals: Vec<f64> = rows.iter().map(|r| r[s]).collect();
        fs::write(
            out,
            polar_heatmap(&format!("Input sensitivity ({name})"), &phi, &vals),
        )?;
        Ok(())
    }

    /// Step the environment with the agent held still and write the force
    /// and position trace.
    pub fn simulate(&self, duration: f64) -> Result<PathBuf> {
        let c = &self.config;
        let data = self.record(c.environment.train_motion, c.seed, duration)?;
        let rows: Vec<Vec<String>> = data
            .records
            .iter()
            .map(|r| {
                vec![
                    num(r.t),
                    num(r.y_obstacle),
                    num(r.y_agent),
                    num(r.cd),
                    num(r.cl),
                ]
            })
            .collect();
        let out = self.path("simulate/trace.csv");
        write_table(&out, &["t", "y_obstacle", "y_agent", "cd", "cl"], &rows)?;
        Ok(out)
    }
}

/// Artifacts `export` knows how to produce.
pub const EXPORT_IDS: [&str; 6] = [
    "train-data",
    "pretrain-loss",
    "obstacle-curve",
    "obstacle-eval",
    "learning-curve",
    "sensitivity",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Svg,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "svg" => Ok(Self::Svg),
            other => Err(Error::Config(format!(
                "unknown format {other:?} (expected csv or svg)"
            ))),
        }
    }
}

impl Pipeline {
    /// Write an artifact into `export/`, returning the files produced.
    pub fn export(&self, id: &str, format: ExportFormat) -> Result<Vec<PathBuf>> {
        if !EXPORT_IDS.contains(&id) {
            return Err(Error::Config(format!(
                "unknown artifact `{id}`; available: {}",
                EXPORT_IDS.join(", ")
            )));
        }
        let dir = self.path("export");
        fs::create_dir_all(&dir)?;
        let copy = |rel: &str, stage: Stage| -> Result<PathBuf> {
            let src = self.require(rel, stage)?;
            let dst = dir.join(src.file_name().expect("artifact paths name a file"));
            fs::copy(&src, &dst)?;
            Ok(dst)
        };
        let tests: Vec<&str> = test_motions().iter().map(|(n, _)| *n).collect();
        let mut out = Vec::new();
        match (id, format) {
            ("train-data", ExportFormat::Csv) => {
                let p = dir.join("train.csv");
                self.train_data()?.write_csv(fs::File::create(&p)?)?;
                out.push(p);
            }
            ("train-data", ExportFormat::Svg) => {
                let data = self.train_data()?;
                let series = [Series::new(
                    "obstacle",
                    data.records
                        .iter()
                        .map(|r| (r.t as f64, r.y_obstacle as f64))
                        .collect(),
                )];
                let p = dir.join("train.svg");
                fs::write(
                    &p,
                    line_plot("Obstacle trajectory (training data)", "t", "y / D", &series),
                )?;
                out.push(p);
            }
            ("pretrain-loss", ExportFormat::Csv) => {
                out.push(copy("pretrain/loss.csv", Stage::Pretrain)?)
            }
            ("pretrain-loss", ExportFormat::Svg) => {
                let p = dir.join("pretrain-loss.svg");
                self.render_pretrain_loss(&p)?;
                out.push(p);
            }
            ("obstacle-curve", ExportFormat::Csv) => {
                for arm in ARMS {
                    out.push(copy(
                        &format!("obstacle/curve-{arm}.csv"),
                        Stage::TrainObstacle,
                    )?);
                }
                out.push(copy("obstacle/summary.csv", Stage::TrainObstacle)?);
            }
            ("obstacle-curve", ExportFormat::Svg) => {
                let p = dir.join("obstacle-curve.svg");
                self.render_obstacle_curve(&p)?;
                out.push(p);
            }
            ("obstacle-eval", ExportFormat::Csv) => {
                for arm in ARMS {
                    for t in &tests {
                        out.push(copy(
                            &format!("obstacle/eval-{arm}-{t}.csv"),
                            Stage::EvalObstacle,
                        )?);
                    }
                }
            }
            ("obstacle-eval", ExportFormat::Svg) => {
                for t in &tests {
                    let p = dir.join(format!("obstacle-eval-{t}.svg"));
                    self.render_obstacle_eval(t, &p)?;
                    out.push(p);
                }
            }
            ("learning-curve", ExportFormat::Csv) => {
                for arm in ARMS {
                    out.push(copy(&format!("rl/summary-{arm}.csv"), Stage::TrainRl)?);
                }
            }
            ("learning-curve", ExportFormat::Svg) => {
                let p = dir.join("learning-curve.svg");
                self.render_learning_curve(&p)?;
                out.push(p);
            }
            ("sensitivity", ExportFormat::Csv) => {
                for arm in ARMS {
                    out.push(copy(&format!("sensitivity/{arm}.csv"), Stage::Sensitivity)?);
                }
                out.push(copy("sensitivity/entropy.csv", Stage::Sensitivity)?);
            }
            ("sensitivity", ExportFormat::Svg) => {
                for arm in ARMS {
                    let p = dir.join(format!("sensitivity-{arm}.svg"));
                    self.render_sensitivity(arm, &p)?;
                    out.push(p);
                }
            }
            _ => unreachable!("id checked above"),
        }
        Ok(out)
    }
}

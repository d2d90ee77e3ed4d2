//! One function per subcommand. Each computes everything first and returns
//! the files to write plus a JSON summary, so failures leave no artifacts.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use swipt_core::circuit::{generate_dataset, read_dataset_csv, write_dataset_csv, DatasetRow, SymbolResponder};
use swipt_core::mdp::TransitionModel;
use swipt_core::optimizer::{sweep_rate_power, Instance, Scheme, Status};
use swipt_core::scenario::{ResponderKind, Scenario};
use swipt_core::surrogate::{mape, train, MlpModel, SurrogatePair, TableResponder, Target, TrainReport};
use swipt_core::{Error, Result};

use crate::artifacts::{Outputs, Provenance};

/// A loaded scenario with command-line overrides applied.
pub struct Context {
    pub scenario: Scenario,
    /// Directory relative paths inside the scenario resolve against.
    pub base_dir: PathBuf,
    pub out_dir: PathBuf,
}

impl Context {
    pub fn load(path: &Path, backend: Option<ResponderKind>, seed: Option<u64>, out: Option<PathBuf>) -> Result<Self> {
        let mut scenario = Scenario::load(path)?;
        if let Some(b) = backend {
            scenario.backend = b;
        }
        if let Some(seed) = seed {
            scenario.seed = seed;
            scenario.train.seed = seed;
        }
        scenario.validate()?;
        if scenario.backend == ResponderKind::Surrogate {
            let Some(s) = &scenario.surrogate else {
                return Err(Error::Config {
                    field: "surrogate".into(),
                    reason: "required when the backend is the surrogate".into(),
                });
            };
            let base = path.parent().unwrap_or(Path::new("."));
            for (field, p) in [("surrogate.voltage_model", &s.voltage_model), ("surrogate.power_model", &s.power_model)] {
                if !base.join(p).is_file() {
                    return Err(Error::Config {
                        field: field.into(),
                        reason: format!("file {} does not exist", base.join(p).display()),
                    });
                }
            }
        }
        let out_dir = out
            .or_else(|| scenario.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out").join(&scenario.name));
        Ok(Self { scenario, base_dir: path.parent().unwrap_or(Path::new(".")).to_path_buf(), out_dir })
    }

    fn outputs(&self) -> Outputs {
        Outputs::new(self.out_dir.clone())
    }

    fn provenance(&self, command: &str) -> Result<Provenance> {
        Provenance::new(command, &self.scenario)
    }

    /// The symbol responder selected by the scenario's backend.
    pub fn responder(&self) -> Result<Box<dyn SymbolResponder>> {
        let s = &self.scenario;
        match s.backend {
            ResponderKind::Circuit => Ok(Box::new(s.simulator()?)),
            ResponderKind::Table => {
                let sim = s.simulator()?;
                let v_grid = linspace(sim.v_l_max(), s.table.voltage_nodes);
                let r_grid = linspace(sim.r_e_max(), s.table.amplitude_nodes);
                Ok(Box::new(TableResponder::tabulate(&sim, v_grid, r_grid)?))
            }
            ResponderKind::Surrogate => {
                let sec = s.surrogate.as_ref().expect("checked at load");
                let voltage = load_model(&self.base_dir.join(&sec.voltage_model))?;
                let power = load_model(&self.base_dir.join(&sec.power_model))?;
                Ok(Box::new(SurrogatePair::new(voltage, power)?))
            }
        }
    }

    pub fn model(&self) -> Result<TransitionModel> {
        self.scenario.build_model(&*self.responder()?)
    }
}

/// `n` evenly spaced points on `[0, top]`.
fn linspace(top: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| top * i as f64 / (n - 1) as f64).collect()
}

/// Reads a network written by `train`, or a bare model document.
fn load_model(path: &Path) -> Result<MlpModel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config { field: "surrogate".into(), reason: format!("cannot read {}: {e}", path.display()) })?;
    let mut doc: Value = serde_json::from_str(&text)?;
    if let Some(inner) = doc.get_mut("model") {
        doc = inner.take();
    }
    MlpModel::from_json(&doc.to_string())
}

pub struct Finished {
    pub outputs: Outputs,
    pub details: Value,
}

fn dataset_csv(rows: &[DatasetRow]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_dataset_csv(rows, &mut buf)?;
    Ok(buf)
}

pub fn simulate(ctx: &Context, point: Option<(f64, f64)>) -> Result<Finished> {
    let responder = ctx.responder()?;
    let mut outputs = ctx.outputs();
    let prov = ctx.provenance("simulate")?;
    if let Some((v0, r_e)) = point {
        let resp = responder.respond(v0, r_e)?;
        let payload = json!({ "v_init": v0, "r_E": r_e, "v_final": resp.final_voltage, "p_avg": resp.average_power });
        outputs.add_json("symbol.json", &prov, "response", &payload)?;
        return Ok(Finished { outputs, details: payload });
    }
    // operating grid of the MDP: state midpoints × received amplitudes
    let s = &ctx.scenario;
    let q = swipt_core::mdp::VoltageQuantizer::new(s.mdp.states, responder.voltage_ceiling())?;
    let gain = s.channel_spec().eh_gain_magnitude()?;
    let amplitudes = s.constellation()?.amplitudes().to_vec();
    let mut rows = Vec::with_capacity(q.states() * amplitudes.len());
    for v in q.midpoints() {
        for r in &amplitudes {
            let r_e = gain * r;
            let resp = responder.respond(v, r_e)?;
            rows.push(DatasetRow { v_init: v, r_e, v_final: resp.final_voltage, p_avg: resp.average_power });
        }
    }
    outputs.add("simulate.csv", dataset_csv(&rows)?);
    outputs.add_json("simulate.meta.json", &prov, "meta", &json!({ "rows": rows.len(), "voltage_ceiling": q.v_max() }))?;
    Ok(Finished { outputs, details: json!({ "rows": rows.len(), "voltage_ceiling": q.v_max() }) })
}

fn fresh_dataset(ctx: &Context) -> Result<Vec<DatasetRow>> {
    let s = &ctx.scenario;
    let sim = s.simulator()?;
    generate_dataset(&sim, s.dataset.total(), sim.r_e_max(), s.seed)
}

pub fn dataset(ctx: &Context) -> Result<Finished> {
    let rows = fresh_dataset(ctx)?;
    let d = &ctx.scenario.dataset;
    let meta = json!({
        "rows": rows.len(),
        "seed": ctx.scenario.seed,
        "split": { "train": d.train, "validation": d.validation, "test": d.test },
    });
    let mut outputs = ctx.outputs();
    outputs.add("dataset.csv", dataset_csv(&rows)?);
    outputs.add_json("dataset.meta.json", &ctx.provenance("dataset")?, "meta", &meta)?;
    Ok(Finished { outputs, details: meta })
}

#[derive(Serialize)]
struct TargetReport {
    target: Target,
    test_mape: f64,
    report: TrainReport,
}

pub fn train_surrogate(ctx: &Context) -> Result<Finished> {
    let d = ctx.scenario.dataset;
    let existing = ctx.out_dir.join("dataset.csv");
    let mut outputs = ctx.outputs();
    let rows = match std::fs::File::open(&existing) {
        Ok(f) => {
            let rows = read_dataset_csv(f)?;
            if rows.len() != d.total() {
                return Err(Error::Config {
                    field: "dataset".into(),
                    reason: format!("{} holds {} rows, the split needs {}", existing.display(), rows.len(), d.total()),
                });
            }
            rows
        }
        Err(_) => {
            let rows = fresh_dataset(ctx)?;
            outputs.add("dataset.csv", dataset_csv(&rows)?);
            rows
        }
    };
    let (train_rows, rest) = rows.split_at(d.train);
    let (validation, test) = rest.split_at(d.validation);
    let prov = ctx.provenance("train")?;
    let mut reports = Vec::new();
    let mut details = serde_json::Map::new();
    for (target, file) in [(Target::FinalVoltage, "voltage_model.json"), (Target::AveragePower, "power_model.json")] {
        let (model, report) = train(train_rows, validation, target, &ctx.scenario.train)?;
        let test_mape = mape(&model, if test.is_empty() { validation } else { test }, ctx.scenario.train.mape_floor);
        outputs.add_json(file, &prov, "model", &model)?;
        details.insert(file.trim_end_matches(".json").into(), json!({ "test_mape": test_mape, "best_epoch": report.best_epoch }));
        reports.push(TargetReport { target, test_mape, report });
    }
    outputs.add_json("train_report.json", &prov, "reports", &reports)?;
    Ok(Finished { outputs, details: Value::Object(details) })
}

pub fn build_mdp(ctx: &Context) -> Result<Finished> {
    let model = ctx.model()?;
    let details = json!({
        "states": model.states(),
        "actions": model.actions(),
        "v_max": model.quantizer().v_max(),
        "clamped_outputs": model.clamped_outputs(),
        "backend": ctx.scenario.backend,
    });
    let mut outputs = ctx.outputs();
    outputs.add_json("mdp.json", &ctx.provenance("build-mdp")?, "model", &model.to_artifact())?;
    Ok(Finished { outputs, details })
}

pub fn solve(ctx: &Context, scheme: Scheme, i_req: Option<f64>) -> Result<Finished> {
    let s = &ctx.scenario;
    let mut cfg = s.solver_config();
    if let Some(v) = i_req {
        cfg.i_req = v;
    }
    cfg.validate()?;
    let model = ctx.model()?;
    let engine = s.mi_engine()?;
    let inst = Instance::new(&model, &engine, &cfg)?;
    let result = inst.solve(scheme, &cfg)?;
    let details = json!({
        "scheme": scheme,
        "i_req_bits": cfg.i_req,
        "status": result.status,
        "achieved_power_watts": result.achieved_power,
        "achieved_mi_bits": result.achieved_mi,
        "evaluated_power_watts": result.evaluated_power,
        "outer_iterations": result.iterations.outer,
        "inner_iterations_max": result.iterations.inner_max,
    });
    let mut outputs = ctx.outputs();
    outputs.add_json(&format!("solve_{}.json", scheme.label()), &ctx.provenance("solve")?, "result", &result)?;
    Ok(Finished { outputs, details })
}

fn status_label(s: Status) -> &'static str {
    match s {
        Status::Optimal => "optimal",
        Status::LimitPoint => "limit_point",
        Status::Infeasible => "infeasible",
    }
}

const PLOT_STUB: &str = r#"# Plots a rate-power sweep written by `swipt sweep`.
# Usage: python plot_sweep.py sweep_<scheme>.csv
import csv
import sys

import matplotlib.pyplot as plt

rows = list(csv.DictReader(open(sys.argv[1])))
mi = [float(r["achieved_mi_bits"]) for r in rows]
power = [1e6 * float(r["power_watts"]) for r in rows]
plt.plot(mi, power, marker="o", label="scheme " + rows[0]["scheme"] if rows else "")
plt.xlabel("mutual information [bit/symbol]")
plt.ylabel("average harvested power [uW]")
plt.grid(True)
plt.legend()
plt.savefig(sys.argv[1].rsplit(".", 1)[0] + ".png", dpi=150)
"#;

pub fn sweep(ctx: &Context, scheme: Scheme, points: usize) -> Result<Finished> {
    let s = &ctx.scenario;
    let cfg = s.solver_config();
    let model = ctx.model()?;
    let engine = s.mi_engine()?;
    let inst = Instance::new(&model, &engine, &cfg)?;
    let sweep = sweep_rate_power(&inst, scheme, &cfg, points)?;
    let t = s.circuit.symbol_duration;
    let mut csv = String::from("i_req_bits,achieved_mi_bits,power_watts,bitrate_bps,scheme,status\n");
    for p in &sweep {
        csv.push_str(&format!(
            "{:.8e},{:.8e},{:.8e},{:.8e},{},{}\n",
            p.i_req,
            p.achieved_mi,
            p.power,
            p.achieved_mi / t,
            scheme.label(),
            status_label(p.status)
        ));
    }
    let monotone = sweep.windows(2).all(|w| w[1].power <= w[0].power * (1.0 + 1e-9) + 1e-15);
    let name = format!("sweep_{}", scheme.label());
    let details = json!({
        "scheme": scheme,
        "requested_points": points,
        "points": sweep.len(),
        "max_mi_bits": inst.max_mi().bits,
        "power_nonincreasing": monotone,
    });
    let mut outputs = ctx.outputs();
    outputs.add(format!("{name}.csv"), csv.into_bytes());
    outputs.add_json(&format!("{name}.meta.json"), &ctx.provenance("sweep")?, "meta", &details)?;
    outputs.add("plot_sweep.py", PLOT_STUB.as_bytes().to_vec());
    Ok(Finished { outputs, details })
}

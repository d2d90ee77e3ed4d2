//! Acceptance harness: one PASS/FAIL line per criterion. Failing criteria
//! are reported, not hidden; the process exits 0 either way.

mod common;

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swipt_core::circuit::{
    generate_dataset, simulate_symbol, Backend, CircuitSimulator, CircuitSpec, MatchingDesign, Topology,
};
use swipt_core::info::{monte_carlo_mutual_information, AmplitudePdf, McSettings, MiEngine, PhaseLaw};
use swipt_core::mdp::{average_power, monte_carlo_rollout, steady_state_joint, Policy, TransitionModel};
use swipt_core::optimizer::{sweep_rate_power, Instance, RatePowerPoint, Scheme, SolverConfig, TraceEntry};
use swipt_core::scenario::{Regime, Scenario};
use swipt_core::surrogate::{mape, train, Target, TrainConfig};
use swipt_core::Error;

type Verdict = Result<(bool, String), String>;

fn report(index: usize, name: &str, f: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    });
    let secs = start.elapsed().as_secs_f64();
    let (passed, detail) = match outcome {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    println!("{} [{index:>2}] {name} ({secs:.1} s): {detail}", if passed { "PASS" } else { "FAIL" });
    passed
}

fn err(e: Error) -> String {
    e.to_string()
}

fn reference() -> Scenario {
    Scenario::reference(Regime::Mp, Topology::HalfWave, MatchingDesign::Minus13Dbm)
}

fn random_pdf(rng: &mut ChaCha8Rng, s: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..s).map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

fn simpson(f: &[f64], h: f64) -> f64 {
    let n = f.len() - 1;
    let inner: f64 = (1..n).map(|i| if i % 2 == 1 { 4.0 * f[i] } else { 2.0 * f[i] }).sum();
    h / 3.0 * (f[0] + f[n] + inner)
}

/// Models of every bundled scenario, kept for the steady-state criterion.
struct Built {
    name: String,
    seed: u64,
    model: TransitionModel,
    build_time: Duration,
}

fn criterion1(full: &mut Vec<Built>) -> Verdict {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut count = 0;
    for sc in Scenario::bundled() {
        let sim = sc.simulator().map_err(err)?;
        for states in [8, 50] {
            let t = Instant::now();
            let model = sc.with_sizes(states, sc.transmitter.constellation_size).build_model(&sim).map_err(err)?;
            let build_time = t.elapsed();
            for i in 0..model.states() {
                for k in 0..model.actions() {
                    let row: f64 = (0..model.states()).map(|j| model.rho(i, j, k)).sum();
                    worst = worst.max((row - 1.0).abs());
                }
            }
            count += 1;
            if states == 50 {
                full.push(Built { name: sc.name.clone(), seed: sc.seed, model, build_time });
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        worst <= 1e-9 && secs < 30.0,
        format!("{count} models (12 scenarios x S_Xi in {{8, 50}}, S = 64), max |row sum - 1| = {worst:.2e}, {secs:.1} s (limit 30 s)"),
    ))
}

fn criterion2(full: &[Built]) -> Verdict {
    if full.is_empty() {
        return Err("no models from criterion 1".into());
    }
    let mut all = true;
    let mut lines = Vec::new();
    for b in full {
        let t = Instant::now();
        let m = &b.model;
        let policy = Policy::Shared(AmplitudePdf::uniform(m.actions()));
        let pi = steady_state_joint(m, &policy).map_err(err)?;
        let expected = average_power(m, &pi);
        let gamma = pi.state_marginal().gamma;
        let roll = monte_carlo_rollout(m, &policy, 5000, b.seed, 0).map_err(err)?;
        let tv = 0.5 * roll.state_histogram.iter().zip(&gamma).map(|(a, b)| (a - b).abs()).sum::<f64>();
        let rel = (roll.average_power - expected).abs() / expected;
        let secs = (t.elapsed() + b.build_time).as_secs_f64();
        let ok = tv <= 0.02 && rel <= 0.02 && secs < 10.0;
        all &= ok;
        // expected TV of 5000 independent draws from the same marginal
        let floor: f64 = gamma.iter().map(|p| (2.0 * p * (1.0 - p) / (std::f64::consts::PI * 5000.0)).sqrt()).sum::<f64>() / 2.0;
        lines.push(format!(
            "{}{}: TV {tv:.4} (i.i.d. floor {floor:.4}), power {:.2}% ({:.1} SE), {secs:.1} s",
            if ok { "" } else { "[x] " },
            b.name,
            100.0 * rel,
            (roll.average_power - expected).abs() / roll.std_error
        ));
    }
    Ok((all, format!("K = 5000, uniform shared pdf, S_Xi = 50, S = 64 | {}", lines.join("; "))))
}

fn reference_engine() -> Result<(Scenario, MiEngine), String> {
    let sc = reference();
    let e = sc.mi_engine().map_err(err)?;
    Ok((sc, e))
}

fn criterion3() -> Verdict {
    let (sc, e) = reference_engine()?;
    let c = sc.constellation().map_err(err)?;
    let s = c.len();
    let ch = sc.channel_spec();
    let (h, sigma) = (ch.ir_gain_magnitude().map_err(err)?, ch.noise_std());
    let mut rng = ChaCha8Rng::seed_from_u64(3);

    let zero = e.mutual_information(&AmplitudePdf::point_mass(s, 0).p);
    let ok_zero = zero.abs() <= 1e-3;

    let a_max = e.normalized_amplitudes().iter().copied().fold(0.0, f64::max);
    let intervals = 20_000;
    let top = (a_max + 12.0) * sigma;
    let grid: Vec<f64> = (0..=intervals).map(|i| top * i as f64 / intervals as f64).collect();
    let mut worst_mass = 0.0f64;
    let mut pdfs = vec![vec![1.0 / s as f64; s]];
    pdfs.extend((0..4).map(|_| random_pdf(&mut rng, s)));
    for p in &pdfs {
        let density = e.output_amplitude_pdf(p, &grid).map_err(err)?;
        worst_mass = worst_mass.max((simpson(&density, top / intervals as f64) - 1.0).abs());
    }
    let ok_mass = worst_mass <= 1e-6;

    let step = 1e-5;
    let mut worst_grad = 0.0f64;
    for _ in 0..50 {
        let p = random_pdf(&mut rng, s);
        let g = e.gradient(&p);
        for k in 0..s {
            let mut hi = p.clone();
            let mut lo = p.clone();
            hi[k] += step;
            lo[k] -= step;
            let fd = (e.mi_unclamped(&hi) - e.mi_unclamped(&lo)) / (2.0 * step);
            worst_grad = worst_grad.max((g[k] - fd).abs() / fd.abs().max(g[k].abs()));
        }
    }
    let ok_grad = worst_grad <= 1e-4;

    let settings = McSettings { samples: 20_000, phase_points: 256, seed: 5 };
    let mut worst_mc = 0.0f64;
    for _ in 0..10 {
        let p = random_pdf(&mut rng, s);
        let mc = monte_carlo_mutual_information(&c, h, sigma, &p, PhaseLaw::Uniform, &settings).map_err(err)?;
        worst_mc = worst_mc.max((mc.bits - e.mutual_information(&p)).abs());
    }
    let ok_mc = worst_mc <= 0.05;
    Ok((
        ok_zero && ok_mass && ok_grad && ok_mc,
        format!(
            "S = 64 reference channel: I(delta_0) = {zero:.2e} bits; max |mass - 1| = {worst_mass:.2e} over 5 pdfs; \
             max gradient rel. error = {worst_grad:.2e} over 50 pdfs; max |MC - quadrature| = {worst_mc:.4} bits over 10 pdfs"
        ),
    ))
}

fn criterion4() -> Verdict {
    let (sc, e) = reference_engine()?;
    let c = sc.constellation().map_err(err)?;
    let ch = sc.channel_spec();
    let (h, sigma) = (ch.ir_gain_magnitude().map_err(err)?, ch.noise_std());
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let settings = McSettings { samples: 20_000, phase_points: 256, seed: 9 };
    let mut all = true;
    let mut margins = Vec::new();
    for _ in 0..5 {
        let p = random_pdf(&mut rng, c.len());
        let uniform = e.mutual_information(&p);
        let half = monte_carlo_mutual_information(&c, h, sigma, &p, PhaseLaw::HalfCircle, &settings).map_err(err)?;
        all &= uniform >= half.bits - 3.0 * half.std_error;
        margins.push(format!("{:.3}-{:.3}", uniform, half.bits));
    }
    Ok((all, format!("uniform-phase minus half-circle MC bits on 5 pdfs: {}", margins.join(", "))))
}

fn criterion5() -> Verdict {
    let t = common::tiny();
    let inst = Instance::new(&t.model, &t.engine, &t.cfg).map_err(err)?;
    let step = 0.02;
    let mut worst = [0.0f64; 3];
    for frac in [0.0, 0.3, 0.6, 0.9] {
        let i_req = frac * inst.max_mi().bits;
        let cfg = t.cfg.with_i_req(i_req);
        let brute = [
            common::brute_scheme1(&t, i_req, step),
            common::brute_scheme2(&t, i_req, step),
            common::brute_scheme3(&t, inst.saturated_profile(), i_req, step),
        ];
        for (idx, scheme) in [Scheme::I, Scheme::II, Scheme::III].into_iter().enumerate() {
            let got = inst.solve(scheme, &cfg).map_err(err)?.achieved_power;
            let b = brute[idx].ok_or("grid search found no feasible point")?;
            worst[idx] = worst[idx].max((got - b).abs() / b);
        }
    }
    Ok((
        worst.iter().all(|w| *w <= 0.01),
        format!(
            "S_Xi = 2, S = 3, grid step 0.02, I_req at 0/30/60/90% of max: max rel. diff I {:.3}%, II {:.3}%, III {:.3}%",
            100.0 * worst[0],
            100.0 * worst[1],
            100.0 * worst[2]
        ),
    ))
}

/// Inner-loop monotonicity and iteration counts of one Scheme II solve.
fn algorithm1_trace(inst: &Instance, cfg: &SolverConfig) -> Result<(bool, usize, usize, bool, f64), String> {
    let r = inst.solve(Scheme::II, cfg).map_err(err)?;
    let mut monotone = true;
    let mut last: Option<(usize, f64)> = None;
    for e in &r.trace {
        if let TraceEntry::Inner { outer, relaxed_power_watts, .. } = e {
            if let Some((o, prev)) = last {
                if o == *outer && *relaxed_power_watts < prev - 1e-12 * prev.abs() {
                    monotone = false;
                }
            }
            last = Some((*outer, *relaxed_power_watts));
        }
    }
    Ok((monotone, r.iterations.outer, r.iterations.inner_max, r.iterations.converged, r.achieved_power))
}

fn criterion6() -> Verdict {
    let sc = reference();
    let start = Instant::now();
    let model = sc.build_model(&sc.simulator().map_err(err)?).map_err(err)?;
    let engine = sc.mi_engine().map_err(err)?;
    let base = sc.solver_config();
    let cfg = SolverConfig { i_req: 7.8, n_max: 5, m_max: 12, inner_term_eps: 1e-7, outer_term_eps: 1e-7, ..base };
    let inst = Instance::new(&model, &engine, &cfg).map_err(err)?;
    let top = inst.max_mi().bits;
    let main = match algorithm1_trace(&inst, &cfg) {
        Ok((mono, outer, inner, conv, _)) => {
            let ok = mono && conv && outer <= 12 && inner <= 5 && start.elapsed().as_secs_f64() < 300.0;
            (ok, format!("I_req 7.8: monotone {mono}, outer {outer}, inner max {inner}, converged {conv}"))
        }
        Err(e) => (false, format!("I_req 7.8 at S_Xi = 50, S = 64: {e} (max MI {top:.3} bits)")),
    };
    let main_secs = start.elapsed().as_secs_f64();
    // the same checks where the requirement is attainable, for the record
    let info = match algorithm1_trace(&inst, &cfg.with_i_req(6.5)) {
        Ok((mono, outer, inner, conv, p)) => format!(
            "diagnostic at I_req 6.5: monotone {mono}, outer {outer}, inner max {inner}, converged {conv}, P {p:.4e} W"
        ),
        Err(e) => format!("diagnostic at I_req 6.5: {e}"),
    };
    Ok((main.0, format!("{} [{main_secs:.1} s]; {info}", main.1)))
}

fn reference_instance_power(t: f64) -> Result<Vec<(f64, [f64; 3])>, String> {
    let mut sc = reference().with_sizes(8, 16);
    sc.circuit.symbol_duration = t;
    let model = sc.build_model(&sc.simulator().map_err(err)?).map_err(err)?;
    let engine = sc.mi_engine().map_err(err)?;
    let cfg = sc.solver_config();
    let inst = Instance::new(&model, &engine, &cfg).map_err(err)?;
    let top = inst.max_mi().bits;
    let mut out = Vec::new();
    for k in 0..6 {
        let i_req = top * k as f64 / 5.0;
        let c = cfg.with_i_req(i_req);
        let p1 = inst.solve(Scheme::I, &c).map_err(err)?.achieved_power;
        let p2 = inst.solve(Scheme::II, &c).map_err(err)?.achieved_power;
        let p3 = inst.solve(Scheme::III, &c).map_err(err)?.evaluated_power.ok_or("no evaluated power")?;
        out.push((i_req, [p1, p2, p3]));
    }
    Ok(out)
}

fn criterion7() -> Verdict {
    let short = reference_instance_power(10e-6)?;
    let long = reference_instance_power(100e-6)?;
    let slack = 1e-6;
    let mut ordered = true;
    let mut tight = true;
    for (_, [p1, p2, p3]) in short.iter().chain(&long) {
        ordered &= *p1 >= p2 - slack && *p2 >= p3 - slack;
        tight &= *p1 >= *p2 * (1.0 - 1e-9) && *p2 >= *p3 * (1.0 - 1e-9);
    }
    let gap = |v: &[(f64, [f64; 3])]| v.iter().map(|(_, p)| p[0] - p[1]).sum::<f64>() / v.len() as f64;
    let rel = |v: &[(f64, [f64; 3])]| v.iter().map(|(_, p)| (p[0] - p[1]) / p[0]).sum::<f64>() / v.len() as f64;
    let (g10, g100) = (gap(&short), gap(&long));
    Ok((
        ordered && g10 > g100,
        format!(
            "MP half-wave -13 dBm, S_Xi = 8, S = 16, 6 I_req points: ordering within 1e-6 W {ordered} (without slack {tight}); \
             mean P_I - P_II = {g10:.3e} W at T = 10 us vs {g100:.3e} W at 100 us (relative {:.2}% vs {:.2}%)",
            100.0 * rel(&short),
            100.0 * rel(&long)
        ),
    ))
}

fn criterion8() -> Verdict {
    let (model, engine) = common::memoryless_model(8);
    let cfg = SolverConfig { ap_budget: 0.3, ..SolverConfig::default() };
    let inst = Instance::new(&model, &engine, &cfg).map_err(err)?;
    let mut worst = 0.0f64;
    for frac in [0.0, 0.3, 0.6, 0.9] {
        let c = cfg.with_i_req(frac * inst.max_mi().bits);
        let two = inst.solve(Scheme::II, &c).map_err(err)?.achieved_power;
        let three = inst.solve(Scheme::III, &c).map_err(err)?.achieved_power;
        worst = worst.max((two - three).abs() / three);
    }
    Ok((worst <= 0.01, format!("state-independent model, 4 I_req points: max |P_II - P_III| / P_III = {:.4}%", 100.0 * worst)))
}

fn criterion9() -> Verdict {
    let spec = |topology, t| CircuitSpec::reference(topology, MatchingDesign::Minus13Dbm, t);
    let v0 = 0.3;
    let hw = spec(Topology::HalfWave, 10e-6);
    let tau = hw.load_resistance * hw.load_capacitance;
    let r = simulate_symbol(&hw, v0, 0.0, Backend::Envelope).map_err(err)?;
    let exact = v0 * (-10e-6 / tau).exp();
    let discharge = (r.final_voltage - exact).abs() / exact;

    let hw_sim = CircuitSimulator::new(spec(Topology::HalfWave, 10e-6), 0.05).map_err(err)?;
    let fw_sim = CircuitSimulator::new(spec(Topology::FullWaveBridge, 10e-6), 0.05).map_err(err)?;
    let bv = hw_sim.spec().diode.breakdown_voltage;
    let mut fw_wins = true;
    for r_e in [0.02, 0.03, 0.05] {
        let a = hw_sim.simulate(0.0, r_e, Backend::Envelope).map_err(err)?;
        let b = fw_sim.simulate(0.0, r_e, Backend::Envelope).map_err(err)?;
        let past = hw_sim.spec().thevenin_voltage(r_e).map_err(err)? + a.final_voltage > bv;
        fw_wins &= past && b.final_voltage > a.final_voltage;
    }

    let mut worst = 0.0f64;
    for topology in [Topology::HalfWave, Topology::FullWaveBridge] {
        let sim = CircuitSimulator::new(spec(topology, 10e-6).with_scaled_carrier(80e6), 0.05).map_err(err)?;
        for (v0, r_e) in [(0.0, 0.005), (0.0, 0.01), (0.2, 0.03), (0.5, 0.05)] {
            let env = sim.simulate(v0, r_e, Backend::Envelope).map_err(err)?;
            let tr = sim.simulate(v0, r_e, Backend::Transient).map_err(err)?;
            worst = worst.max((env.final_voltage - tr.final_voltage).abs() / tr.final_voltage);
            worst = worst.max((env.average_power - tr.average_power).abs() / tr.average_power);
        }
    }
    Ok((
        discharge <= 0.01 && fw_wins && worst <= 0.03,
        format!(
            "R_L C_L = {:.1} us, discharge error {:.3}%; full-wave above half-wave past breakdown at r_E = 0.02/0.03/0.05: {fw_wins}; \
             envelope vs 80 MHz transient max rel. diff {:.2}%",
            tau * 1e6,
            100.0 * discharge,
            100.0 * worst
        ),
    ))
}

fn criterion10() -> Verdict {
    let start = Instant::now();
    let sc = reference();
    let sim = sc.simulator().map_err(err)?;
    let rows = generate_dataset(&sim, 3000, sc.max_received_amplitude().map_err(err)?, sc.seed).map_err(err)?;
    let (tr, rest) = rows.split_at(2000);
    let (va, te) = rest.split_at(500);
    let cfg = TrainConfig::default();
    let mut parts = Vec::new();
    let mut ok = true;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for target in [Target::FinalVoltage, Target::AveragePower] {
        let (model, _) = train(tr, va, target, &cfg).map_err(err)?;
        let test = mape(&model, te, cfg.mape_floor);
        let inside = (0..10_000).all(|_| {
            let v = rng.random_range(-2.0..2.0) * sim.v_l_max();
            let r = rng.random_range(-2.0..2.0) * sim.r_e_max();
            let y = model.predict(v, r);
            (0.0..=model.output_scale).contains(&y)
        });
        ok &= test <= 0.10 && inside;
        parts.push(format!("{target:?} test MAPE {:.2}%, outputs in [0, scale] {inside}", 100.0 * test));
        if target == Target::FinalVoltage {
            let (again, _) = train(tr, va, target, &cfg).map_err(err)?;
            let same = again == model;
            ok &= same;
            parts.push(format!("retrain with seed {} identical {same}", cfg.seed));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 120.0;
    Ok((ok, format!("2000/500/500 split: {}; {secs:.1} s (limit 120 s)", parts.join("; "))))
}

const SWEEP_STATES: usize = 16;
const SWEEP_AMPLITUDES: usize = 32;
const SWEEP_POINTS: usize = 5;

fn criterion11() -> Verdict {
    // matching networks as in the region comparison: -13 dBm for LP and MP, 0 dBm for HP
    let mut sweeps: HashMap<(Regime, Topology, u32), Vec<RatePowerPoint>> = HashMap::new();
    for regime in Regime::ALL {
        let design = if regime == Regime::Hp { MatchingDesign::ZeroDbm } else { MatchingDesign::Minus13Dbm };
        for topology in [Topology::HalfWave, Topology::FullWaveBridge] {
            for t_us in [10u32, 100] {
                let mut sc = Scenario::reference(regime, topology, design).with_sizes(SWEEP_STATES, SWEEP_AMPLITUDES);
                sc.circuit.symbol_duration = t_us as f64 * 1e-6;
                let model = sc.build_model(&sc.simulator().map_err(err)?).map_err(err)?;
                let engine = sc.mi_engine().map_err(err)?;
                let cfg = sc.solver_config();
                let inst = Instance::new(&model, &engine, &cfg).map_err(err)?;
                let mut pts = sweep_rate_power(&inst, Scheme::II, &cfg, SWEEP_POINTS).map_err(err)?;
                pts.sort_by(|a, b| a.i_req.total_cmp(&b.i_req));
                sweeps.insert((regime, topology, t_us), pts);
            }
        }
    }
    let mut notes = Vec::new();

    let mut increases = 0;
    for ((regime, topology, t), pts) in &sweeps {
        for w in pts.windows(2) {
            if w[1].power > w[0].power * (1.0 + 1e-9) {
                increases += 1;
                notes.push(format!("(a) {regime:?}/{topology:?}/{t}us rises at I_req {:.2}", w[1].i_req));
            }
        }
    }
    let a = increases == 0 && sweeps.values().all(|p| p.len() == SWEEP_POINTS);

    let mut b = true;
    for regime in Regime::ALL {
        for topology in [Topology::HalfWave, Topology::FullWaveBridge] {
            let short = &sweeps[&(regime, topology, 10)];
            let long = &sweeps[&(regime, topology, 100)];
            for (s, l) in short.iter().zip(long) {
                let rate_ok = s.achieved_mi / 10e-6 > l.achieved_mi / 100e-6;
                let power_ok = s.power < l.power;
                if !(rate_ok && power_ok) {
                    b = false;
                    notes.push(format!(
                        "(b) {regime:?}/{topology:?} at I_req {:.2}: P(10us) {:.3e} vs P(100us) {:.3e}",
                        s.i_req, s.power, l.power
                    ));
                }
            }
        }
    }

    let mut c = true;
    let mut margins = Vec::new();
    for regime in Regime::ALL {
        for t in [10u32, 100] {
            let hw = &sweeps[&(regime, Topology::HalfWave, t)];
            let fw = &sweeps[&(regime, Topology::FullWaveBridge, t)];
            let want_hw = regime != Regime::Hp;
            let mut wins = 0;
            for (h, f) in hw.iter().zip(fw) {
                if (h.power > f.power) == want_hw {
                    wins += 1;
                }
            }
            c &= wins == hw.len().min(fw.len());
            let mean = |v: &[RatePowerPoint]| v.iter().map(|p| p.power).sum::<f64>() / v.len() as f64;
            margins.push(format!("{}/{t}us HW {:.3e} FW {:.3e} W", regime.label(), mean(hw), mean(fw)));
        }
    }
    if !c {
        notes.push("(c) order violated at some I_req".into());
    }
    Ok((
        a && b && c,
        format!(
            "Scheme II sweeps, S_Xi = {SWEEP_STATES}, S = {SWEEP_AMPLITUDES}, {SWEEP_POINTS} points, T in {{10, 100}} us: \
             (a) nonincreasing {a}; (b) shorter T higher rate and lower power {b}; (c) HW>FW in LP/MP, FW>HW in HP {c} \
             [mean power {}]{}",
            margins.join(", "),
            if notes.is_empty() { String::new() } else { format!(" | {}", notes.join("; ")) }
        ),
    ))
}

fn main() {
    let start = Instant::now();
    let mut full = Vec::new();
    let results = [
        report(1, "transition stochasticity", || criterion1(&mut full)),
        report(2, "steady state vs Monte-Carlo rollout", || criterion2(&full)),
        report(3, "MI engine", criterion3),
        report(4, "uniform phase dominates half-circle phase", criterion4),
        report(5, "brute-force equivalence", criterion5),
        report(6, "Scheme II alternating loop at I_req = 7.8", criterion6),
        report(7, "scheme ordering and T gap", criterion7),
        report(8, "memoryless limit", criterion8),
        report(9, "circuit sanity", criterion9),
        report(10, "surrogate", criterion10),
        report(11, "qualitative region shapes", criterion11),
    ];
    let passed = results.iter().filter(|p| **p).count();
    println!("{passed}/{} criteria passed in {:.1} s", results.len(), start.elapsed().as_secs_f64());
}

//! Fixed-policy estimator diagnostics.
//!
//! Pairs the empirical behaviour of the first-visit estimator with its exact
//! counterparts: the conditional-on-visit mean of `J̃(i)` against `J^μ(i)`
//! (zero-mean noise) and the visit frequency against `q_μ(i)`.

use std::fmt::Write as _;

use rand::Rng;

use super::trajectory::{simulate_into, tail_costs_into, StepLimit, TailEstimates, Termination, Trajectory};
use super::OpiError;
use crate::mdp::{analyze, InitialDistribution, Mdp};
use crate::solvers::{evaluate_policy_exact, reach_probabilities, Policy};

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticRow {
    pub state: usize,
    pub visit_freq: f64,
    pub q_exact: f64,
    /// Mean of `J̃(i)` over trajectories that visit `i`.
    pub mean_estimate: Option<f64>,
    /// Standard error of that mean; needs at least two visits.
    pub stderr: Option<f64>,
    pub j_exact: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub rows: Vec<DiagnosticRow>,
    pub samples: usize,
    /// Declared bound on the truncation bias of each tail estimate.
    pub truncation_bias: f64,
}

impl Diagnostics {
    pub const CSV_HEADER: &'static str = "state,visit_freq,q_exact,mean_estimate,stderr,j_exact";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:e}"));
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{},{},{:e}",
                r.state,
                r.visit_freq,
                r.q_exact,
                opt(r.mean_estimate),
                opt(r.stderr),
                r.j_exact
            );
        }
        out
    }
}

/// Draws `samples` independent trajectories of the fixed policy `policy`,
/// each started from `p`, and tabulates the per-state estimator statistics.
pub fn estimator_diagnostics<R: Rng + ?Sized>(
    mdp: &Mdp,
    policy: &Policy,
    p: &InitialDistribution,
    samples: usize,
    rng: &mut R,
    epsilon_bias: f64,
) -> Result<Diagnostics, OpiError> {
    let n = mdp.num_states();
    let report = analyze(mdp, p);
    let q = reach_probabilities(mdp, policy, p, &report)?;
    let exact = evaluate_policy_exact(mdp, policy)?;
    let limit = StepLimit::for_mdp(mdp, epsilon_bias);

    // Welford accumulators
    let mut count = vec![0usize; n];
    let mut mean = vec![0.0f64; n];
    let mut m2 = vec![0.0f64; n];
    let mut traj = Trajectory {
        steps: Vec::new(),
        termination: Termination::AbsorbedAt(0),
    };
    let (mut tails, mut seen, mut est) = (Vec::new(), Vec::new(), TailEstimates::default());
    for _ in 0..samples {
        let start = p.sample(rng);
        simulate_into(mdp, policy, start, rng, limit, &mut traj)?;
        tail_costs_into(&traj, mdp.discount(), &mut tails, &mut seen, &mut est);
        for e in &est.entries {
            let i = e.state;
            count[i] += 1;
            let delta = e.estimate - mean[i];
            mean[i] += delta / count[i] as f64;
            m2[i] += delta * (e.estimate - mean[i]);
        }
    }
    let rows = (0..n)
        .map(|i| {
            let c = count[i];
            DiagnosticRow {
                state: i,
                visit_freq: if samples == 0 { 0.0 } else { c as f64 / samples as f64 },
                q_exact: q[i],
                mean_estimate: (c > 0).then_some(mean[i]),
                stderr: (c > 1).then(|| (m2[i] / (c - 1) as f64 / c as f64).sqrt()),
                j_exact: exact[i],
            }
        })
        .collect();
    Ok(Diagnostics {
        rows,
        samples,
        truncation_bias: epsilon_bias,
    })
}

use std::f64::consts::PI;

use crate::protocol::Lie;
use crate::qstate::{conditional_alpha, ket_x, ket_y, photon_outcome_prob, prepare_pair, QubitState};

/// Expected alpha state Bob computes for a pair announced as `(p'', q'')`,
/// claimed unmeasured with angle `theta`, when his own result was that of
/// the given lie rule.
pub fn expected_state(theta: f64, announced: (u8, u8), lie: Lie) -> Option<QubitState> {
    let q2 = announced.1;
    let (p1, q1) = bob_result(announced, lie);
    // the claimed value of an unmeasured pair equals the announced value
    let claimed = prepare_pair(theta, q2).ok()?;
    conditional_alpha(&claimed, p1, q1)
}

/// Bob's actual `(p', q')` that produces `announced` under `lie`.
fn bob_result(announced: (u8, u8), lie: Lie) -> (u8, u8) {
    // every lie rule is an involution
    lie.apply(announced.0, announced.1)
}

/// Posterior weights over Bob's lie rule, from Alice's side, for a pair she
/// measured with outcome `p_alice` after preparing it with value `q`.
/// `priors` are proportional to the honest, a, b and c counts.
pub fn lie_posterior(theta: f64, q: u8, p_alice: u8, announced: (u8, u8), priors: [f64; 4]) -> [f64; 4] {
    let psi = prepare_pair(theta, q).expect("theta inside (0, pi/2)");
    let mut w = [0.0; 4];
    for (slot, (lie, prior)) in w.iter_mut().zip(Lie::MEASURED.into_iter().zip(priors)) {
        let (p1, q1) = bob_result(announced, lie);
        let pq = photon_outcome_prob(&psi, p1, q1);
        if pq <= 0.0 {
            continue;
        }
        let alpha = conditional_alpha(&psi, p1, q1).expect("positive weight");
        let outcome = if p_alice == 0 { ket_x() } else { ket_y() };
        *slot = prior * pq * outcome.fidelity(&alpha);
    }
    let total: f64 = w.iter().sum();
    if total > 0.0 {
        w.iter_mut().for_each(|x| *x /= total);
    }
    w
}

/// Real state maximizing the smallest pass probability over the expected
/// states Bob may hold with nonzero posterior weight.
pub fn best_guess_state(theta: f64, q: u8, p_alice: u8, announced: (u8, u8), priors: [f64; 4]) -> QubitState {
    let post = lie_posterior(theta, q, p_alice, announced, priors);
    let targets: Vec<QubitState> = Lie::MEASURED
        .into_iter()
        .zip(post)
        .filter(|&(_, w)| w > 1e-12)
        .filter_map(|(lie, _)| expected_state(theta, announced, lie))
        .collect();
    if targets.is_empty() {
        return ket_x();
    }
    let worst = |phi: f64| {
        let a = QubitState::at_angle(phi);
        targets.iter().map(|e| e.fidelity(&a)).fold(f64::INFINITY, f64::min)
    };
    const STEPS: usize = 3600;
    let (mut best_phi, mut best) = (0.0, f64::NEG_INFINITY);
    for i in 0..STEPS {
        let phi = PI * i as f64 / STEPS as f64;
        let v = worst(phi);
        if v > best + 1e-15 {
            best = v;
            best_phi = phi;
        }
    }
    // golden-section polish inside the winning grid cell
    let h = PI / STEPS as f64;
    let (mut lo, mut hi) = (best_phi - h, best_phi + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if worst(a) < worst(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    let phi = 0.5 * (lo + hi);
    if worst(phi) >= best {
        QubitState::at_angle(phi)
    } else {
        QubitState::at_angle(best_phi)
    }
}

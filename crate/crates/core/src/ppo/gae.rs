/// Generalized advantage estimates and return targets for one worker's
/// sequence. `dones[t]` marks that the episode ended at transition `t`;
/// `last_value` bootstraps the state after the final transition.
pub fn gae(rewards: &[f64], values: &[f64], dones: &[bool], last_value: f64, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let next_value = if t + 1 < n { values[t + 1] } else { last_value };
        let keep = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * keep - values[t];
        running = delta + gamma * lambda * keep * running;
        adv[t] = running;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Shifts and scales to zero mean, unit (population) std. Fewer than two
/// values are left alone; a constant batch is only centered.
pub fn standardize(values: &mut [f64]) {
    let n = values.len();
    if n < 2 {
        return;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    let scale = if std > 1e-12 { std } else { 1.0 };
    for v in values.iter_mut() {
        *v = (*v - mean) / scale;
    }
}

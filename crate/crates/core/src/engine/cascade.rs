use crate::network::WeightMatrix;

use super::EngineError;

/// Outcome of the avalanche at one spiking instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Cascade {
    /// `I_0, I_1, ...`, each sorted, pairwise disjoint, none empty.
    pub waves: Vec<Vec<usize>>,
    /// Union of the waves, sorted.
    pub coalition: Vec<usize>,
    /// Total pulse received by each unit from coalition members.
    pub received: Vec<f64>,
    /// Satisfaction after the instant: zero for members, `pre + received`
    /// otherwise.
    pub post: Vec<f64>,
}

/// Wave closure of the interaction rule.
///
/// `I_0` is `initiators`. Wave `p` collects every unit outside the earlier
/// waves whose `pre + (pulses from earlier waves)` reaches its goal; the
/// inequality is evaluated for all candidates before any of them fires, so
/// the result does not depend on the order units are visited in. The pulse
/// sums are signed, so antagonist weights can keep a unit out of a wave.
pub fn resolve_cascade(
    weights: &WeightMatrix,
    thetas: &[f64],
    pre: &[f64],
    initiators: &[usize],
) -> Result<Cascade, EngineError> {
    let m = pre.len();
    if weights.m() != m || thetas.len() != m {
        return Err(EngineError::InvalidArgument(format!(
            "cascade over {m} units with {} goals and a {}-unit weight matrix",
            thetas.len(),
            weights.m()
        )));
    }
    let mut wave: Vec<usize> = initiators.to_vec();
    wave.sort_unstable();
    wave.dedup();
    if wave.is_empty() {
        return Err(EngineError::InvalidArgument("empty initiator set".into()));
    }
    if let Some(&bad) = wave.iter().find(|&&i| i >= m) {
        return Err(EngineError::InvalidArgument(format!(
            "initiator {bad} out of range for {m} units"
        )));
    }

    let mut member = vec![false; m];
    let mut received = vec![0.0; m];
    let mut waves: Vec<Vec<usize>> = Vec::new();
    while !wave.is_empty() {
        if waves.len() == m {
            return Err(EngineError::CascadeOverflow { m });
        }
        for &i in &wave {
            member[i] = true;
        }
        for &i in &wave {
            let row = weights.row(i);
            for j in 0..m {
                if !member[j] {
                    received[j] += row[j];
                }
            }
        }
        waves.push(wave);
        wave = (0..m)
            .filter(|&j| !member[j] && pre[j] + received[j] >= thetas[j])
            .collect();
    }

    let coalition: Vec<usize> = (0..m).filter(|&j| member[j]).collect();
    let post = (0..m)
        .map(|j| if member[j] { 0.0 } else { pre[j] + received[j] })
        .collect();
    Ok(Cascade {
        waves,
        coalition,
        received,
        post,
    })
}

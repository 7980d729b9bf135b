//! The quantum circuit Born machine: exact Born-rule distribution of the
//! parameterized line circuit, KL objective against the reweighted training
//! distribution, categorical sampling, and CMA-ES training.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::ansatz::CircuitAnsatz;
use super::state::Statevector;
use super::QsimError;
use crate::bitspace::{Bitstring, TrainingSet};
use crate::neural::{GenerativeModel, TrainError};
use crate::optim::{CmaesConfig, CmaesState};
use crate::seeds;

/// Hyperparameters of a Born machine runner.
#[derive(Clone, Copy, Debug)]
pub struct QcbmConfig {
    /// Alternating rotation/entangling blocks.
    pub n_layers: usize,
    /// CMA-ES initial step size.
    pub sigma0: f64,
    /// CMA-ES population; `None` selects the dimension-based default.
    pub population: Option<usize>,
    /// KL regularization floor for vanishing circuit probabilities.
    pub delta: f64,
}

impl Default for QcbmConfig {
    fn default() -> Self {
        Self {
            n_layers: 8,
            sigma0: 0.1,
            population: None,
            delta: 1e-8,
        }
    }
}

/// A Born machine with its current angles and exact outcome distribution.
///
/// The probability table is kept in sync with the angles, so sampling and
/// `exact_log_prob` are read-only. One training step is one CMA-ES
/// generation; candidate evaluations run in parallel and are merged by
/// candidate index.
pub struct QcbmModel {
    ansatz: CircuitAnsatz,
    theta: Vec<f64>,
    probs: Vec<f64>,
    config: QcbmConfig,
    cmaes: Option<CmaesState>,
    train_rng: ChaCha8Rng,
    step: u64,
}

impl QcbmModel {
    /// Builds a model with angles drawn uniformly from `[-pi/2, pi/2]`.
    pub fn new(n_qubits: usize, config: QcbmConfig, seed: u64) -> Result<Self, QsimError> {
        let ansatz = CircuitAnsatz::line(n_qubits, config.n_layers)?;
        // Constructing the zero state enforces the simulation cap up front.
        Statevector::zero_state(n_qubits)?;
        let mut init_rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, &["qcbm", "init"]));
        let half_pi = std::f64::consts::FRAC_PI_2;
        let theta: Vec<f64> = (0..ansatz.parameter_count())
            .map(|_| init_rng.gen_range(-half_pi..half_pi))
            .collect();
        let probs = born_probabilities_for(&ansatz, &theta)?;
        Ok(Self {
            ansatz,
            theta,
            probs,
            config,
            cmaes: None,
            train_rng: ChaCha8Rng::seed_from_u64(seeds::derive(seed, &["qcbm", "train"])),
            step: 0,
        })
    }

    pub fn ansatz(&self) -> &CircuitAnsatz {
        &self.ansatz
    }

    pub fn parameters(&self) -> &[f64] {
        &self.theta
    }

    /// Replaces the angles and refreshes the outcome distribution.
    pub fn set_parameters(&mut self, theta: Vec<f64>) -> Result<(), QsimError> {
        let probs = born_probabilities_for(&self.ansatz, &theta)?;
        self.theta = theta;
        self.probs = probs;
        Ok(())
    }

    /// Exact Born-rule outcome table `p(x) = |<x|U(theta)|0...0>|^2`.
    pub fn born_probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// KL divergence of the training distribution from the circuit
    /// distribution, with the circuit probability clamped below by `delta`.
    pub fn kl_loss(&self, train: &TrainingSet) -> Result<f64, TrainError> {
        self.check_dims(train)?;
        Ok(kl_between(train, &self.probs, self.config.delta))
    }

    fn check_dims(&self, train: &TrainingSet) -> Result<(), TrainError> {
        if train.n_var() != self.ansatz.n_qubits() {
            return Err(TrainError::DimensionMismatch {
                model: "qcbm",
                model_n: self.ansatz.n_qubits(),
                train_n: train.n_var(),
            });
        }
        Ok(())
    }

    /// Writes the versioned text checkpoint: ansatz descriptor plus one
    /// angle per line at 17 significant digits.
    pub fn save_checkpoint(&self, path: &Path) -> Result<(), QsimError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "qcbm-checkpoint-v1")?;
        writeln!(
            out,
            "n_qubits={}\tn_layers={}\ttopology={}",
            self.ansatz.n_qubits(),
            self.ansatz.n_layers(),
            self.ansatz.topology()
        )?;
        for angle in &self.theta {
            writeln!(out, "{angle:.16e}")?;
        }
        out.flush()?;
        Ok(())
    }

    /// Restores a checkpoint. Training state starts fresh.
    pub fn load_checkpoint(path: &Path, config: QcbmConfig, seed: u64) -> Result<Self, QsimError> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut lines = reader.lines();
        let magic = lines
            .next()
            .ok_or_else(|| QsimError::MalformedCheckpoint("empty file".into()))??;
        if magic != "qcbm-checkpoint-v1" {
            return Err(QsimError::MalformedCheckpoint(format!(
                "unsupported version line {magic:?}"
            )));
        }
        let descriptor = lines
            .next()
            .ok_or_else(|| QsimError::MalformedCheckpoint("missing descriptor".into()))??;
        let mut n_qubits = None;
        let mut n_layers = None;
        for field in descriptor.split('\t') {
            match field.split_once('=') {
                Some(("n_qubits", v)) => n_qubits = v.parse::<usize>().ok(),
                Some(("n_layers", v)) => n_layers = v.parse::<usize>().ok(),
                Some(("topology", v)) => {
                    v.parse::<super::Topology>()?;
                }
                _ => {
                    return Err(QsimError::MalformedCheckpoint(format!(
                        "bad descriptor field {field:?}"
                    )))
                }
            }
        }
        let (n_qubits, n_layers) = match (n_qubits, n_layers) {
            (Some(q), Some(l)) => (q, l),
            _ => {
                return Err(QsimError::MalformedCheckpoint(
                    "descriptor must carry n_qubits and n_layers".into(),
                ))
            }
        };
        let mut theta = Vec::new();
        for line in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            theta.push(line.parse::<f64>().map_err(|_| {
                QsimError::MalformedCheckpoint(format!("bad angle line {line:?}"))
            })?);
        }
        let mut model = Self::new(n_qubits, QcbmConfig { n_layers, ..config }, seed)?;
        if theta.len() != model.ansatz.parameter_count() {
            return Err(QsimError::ParameterCountMismatch {
                expected: model.ansatz.parameter_count(),
                got: theta.len(),
            });
        }
        model.set_parameters(theta)?;
        Ok(model)
    }
}

/// Builds the statevector for the given angles and returns its outcome table.
pub fn born_probabilities_for(
    ansatz: &CircuitAnsatz,
    theta: &[f64],
) -> Result<Vec<f64>, QsimError> {
    let mut state = Statevector::zero_state(ansatz.n_qubits())?;
    for gate in ansatz.bind(theta)? {
        super::state::apply_gate(&mut state, &gate)?;
    }
    Ok(state.probabilities())
}

/// `KL(P_train || P_circuit)` over the training support with probability
/// floor `delta`: finite for every angle setting.
fn kl_between(train: &TrainingSet, probs: &[f64], delta: f64) -> f64 {
    train
        .entries()
        .iter()
        .zip(train.weights())
        .map(|(&(x, _), &w)| {
            let p = probs[x.word() as usize].max(delta);
            w * (w / p).ln()
        })
        .sum()
}

fn kl_for_candidate(
    ansatz: &CircuitAnsatz,
    theta: &[f64],
    train: &TrainingSet,
    delta: f64,
) -> Result<f64, QsimError> {
    let mut state = Statevector::zero_state(ansatz.n_qubits())?;
    for gate in ansatz.bind(theta)? {
        super::state::apply_gate(&mut state, &gate)?;
    }
    Ok(train
        .entries()
        .iter()
        .zip(train.weights())
        .map(|(&(x, _), &w)| {
            let p = state.probability(x.word()).max(delta);
            w * (w / p).ln()
        })
        .sum())
}

impl GenerativeModel for QcbmModel {
    fn tag(&self) -> &'static str {
        "qcbm"
    }

    fn n_var(&self) -> usize {
        self.ansatz.n_qubits()
    }

    fn parameter_count(&self) -> usize {
        self.ansatz.parameter_count()
    }

    fn hyperparameters(&self) -> Vec<(String, String)> {
        vec![
            ("Number of layers".into(), self.ansatz.n_layers().to_string()),
            ("Circuit topology".into(), "Line topology".into()),
            (
                "Optimizer".into(),
                format!("CMA-ES optimizer with sigma0 = {}", self.config.sigma0),
            ),
            (
                "Initialization".into(),
                "Random initialization between -pi/2 and pi/2".into(),
            ),
            (
                "Total number of parameters".into(),
                self.ansatz.parameter_count().to_string(),
            ),
        ]
    }

    /// One CMA-ES generation on the KL objective. Returns the best KL value
    /// evaluated so far; the model's angles track that best candidate.
    fn train_step(&mut self, train: &TrainingSet) -> Result<f64, TrainError> {
        self.check_dims(train)?;
        self.step += 1;
        if self.cmaes.is_none() {
            self.cmaes = Some(CmaesState::new(
                self.theta.clone(),
                CmaesConfig {
                    sigma0: self.config.sigma0,
                    population: self.config.population,
                },
            )?);
        }
        let cmaes = self.cmaes.as_mut().expect("initialized above");
        let candidates = cmaes.ask(&mut self.train_rng);
        let delta = self.config.delta;
        let ansatz = &self.ansatz;
        let fitnesses: Vec<f64> = candidates
            .par_iter()
            .map(|theta| {
                kl_for_candidate(ansatz, theta, train, delta)
                    .map(|kl| if kl.is_finite() { kl } else { f64::NAN })
                    .unwrap_or(f64::NAN)
            })
            .collect();
        cmaes.tell(&candidates, &fitnesses)?;
        let (best_theta, best_value) = cmaes.best().expect("tell succeeded");
        if best_theta != self.theta.as_slice() {
            let best_theta = best_theta.to_vec();
            self.set_parameters(best_theta)
                .expect("best candidate has the ansatz arity");
        }
        if !best_value.is_finite() {
            return Err(TrainError::NanLoss {
                model: "qcbm",
                step: self.step,
            });
        }
        Ok(best_value)
    }

    fn sample_batch(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<Bitstring> {
        let mut cumulative = Vec::with_capacity(self.probs.len());
        let mut total = 0.0;
        for &p in &self.probs {
            total += p;
            cumulative.push(total);
        }
        let n_var = self.ansatz.n_qubits();
        (0..n)
            .map(|_| {
                let r: f64 = rng.gen::<f64>() * total;
                let idx = cumulative.partition_point(|&c| c <= r);
                let idx = idx.min(self.probs.len() - 1);
                Bitstring::from_word(idx as u64, n_var).expect("index fits n_var bits")
            })
            .collect()
    }

    fn exact_log_prob(&self, x: &Bitstring) -> Option<f64> {
        if x.len() != self.ansatz.n_qubits() {
            return None;
        }
        Some(self.probs[x.word() as usize].ln())
    }

    fn has_exact_log_prob(&self) -> bool {
        true
    }
}

/// Drives `n_epochs` training steps, invoking `eval_hook` every
/// `eval_interval` steps with the epoch, the model, and the current loss.
/// Returns the full loss trace.
pub fn train_qcbm<F>(
    model: &mut QcbmModel,
    train: &TrainingSet,
    n_epochs: u64,
    eval_interval: u64,
    mut eval_hook: F,
) -> Result<Vec<f64>, TrainError>
where
    F: FnMut(u64, &QcbmModel, f64),
{
    let mut trace = Vec::with_capacity(n_epochs as usize);
    for epoch in 1..=n_epochs {
        let loss = model.train_step(train)?;
        trace.push(loss);
        if eval_interval > 0 && epoch % eval_interval == 0 {
            eval_hook(epoch, model, loss);
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitspace::SolutionSpace;

    fn uniform_weight_train(n_var: usize, texts: &[&str]) -> TrainingSet {
        // Build a tiny training set through the public constructor by using
        // a dataset file, so entries and weights are exactly the given ones.
        let dir = std::env::temp_dir().join("genrace_qcbm_tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(format!("train_{n_var}_{}.tsv", texts.join("_")));
        let entries: Vec<(Bitstring, i64)> = texts
            .iter()
            .map(|t| {
                let x = Bitstring::from_text(t).unwrap();
                (x, crate::bitspace::separation_cost(&x))
            })
            .collect();
        let costs: Vec<i64> = entries.iter().map(|&(_, c)| c).collect();
        let (beta_hat, _, _) = crate::bitspace::reweight(&costs);
        let mut content = format!("n_var={n_var}\tepsilon=0.5\tseed=0\tbeta_hat={beta_hat:.16e}\n");
        for (x, c) in &entries {
            content.push_str(&format!("{x}\t{c}\n"));
        }
        std::fs::write(&path, content).unwrap();
        TrainingSet::read_from(&path).unwrap()
    }

    #[test]
    fn zero_angles_give_point_mass_on_zero() {
        let mut model = QcbmModel::new(3, QcbmConfig { n_layers: 1, ..Default::default() }, 1)
            .unwrap();
        model.set_parameters(vec![0.0; 6]).unwrap();
        let probs = model.born_probabilities();
        assert!((probs[0] - 1.0).abs() < 1e-12);
        assert!(probs[1..].iter().all(|&p| p < 1e-15));
    }

    #[test]
    fn born_table_sums_to_one_for_random_angles() {
        for seed in 0..5 {
            let model =
                QcbmModel::new(4, QcbmConfig { n_layers: 3, ..Default::default() }, seed).unwrap();
            let total: f64 = model.born_probabilities().iter().sum();
            assert!((total - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn kl_is_zero_when_distribution_matches_support() {
        // Rx(pi) sends |0> to |1>: the circuit reproduces the one-point
        // training distribution exactly.
        let train = uniform_weight_train(1, &["1"]);
        let mut model =
            QcbmModel::new(1, QcbmConfig { n_layers: 1, ..Default::default() }, 0).unwrap();
        model
            .set_parameters(vec![std::f64::consts::PI, 0.0])
            .unwrap();
        let kl = model.kl_loss(&train).unwrap();
        assert!(kl.abs() < 1e-12, "kl = {kl}");
    }

    #[test]
    fn kl_clamps_zero_probability_support_points() {
        // Identity circuit: p("1") = 0, so the single weight-1 support point
        // contributes 1 * ln(1 / delta).
        let train = uniform_weight_train(1, &["1"]);
        let mut model =
            QcbmModel::new(1, QcbmConfig { n_layers: 1, ..Default::default() }, 0).unwrap();
        model.set_parameters(vec![0.0, 0.0]).unwrap();
        let kl = model.kl_loss(&train).unwrap();
        let expected = (1.0f64 / 1e-8).ln();
        assert!((kl - expected).abs() < 1e-9, "kl = {kl}, expected {expected}");
    }

    #[test]
    fn sampling_is_seed_reproducible() {
        let model = QcbmModel::new(4, QcbmConfig::default(), 9).unwrap();
        let a = model.sample(500, 77);
        let b = model.sample(500, 77);
        assert_eq!(a.queries, b.queries);
        let c = model.sample(500, 78);
        assert_ne!(a.queries, c.queries);
    }

    #[test]
    fn deterministic_circuit_samples_one_string() {
        let mut model =
            QcbmModel::new(2, QcbmConfig { n_layers: 1, ..Default::default() }, 0).unwrap();
        model
            .set_parameters(vec![std::f64::consts::PI, 0.0, std::f64::consts::PI, 0.0])
            .unwrap();
        let batch = model.sample(200, 5);
        assert!(batch.queries.iter().all(|x| x.to_string() == "11"));
    }

    #[test]
    fn uniform_circuit_sampling_frequencies() {
        // Two Rx(pi/2) rotations: uniform over 4 outcomes; each frequency
        // within 4 sigma of 0.25 at 10^5 draws.
        let mut model =
            QcbmModel::new(2, QcbmConfig { n_layers: 1, ..Default::default() }, 0).unwrap();
        let half_pi = std::f64::consts::FRAC_PI_2;
        model
            .set_parameters(vec![half_pi, 0.0, half_pi, 0.0])
            .unwrap();
        let n = 100_000usize;
        let batch = model.sample(n, 3);
        let mut counts = [0usize; 4];
        for x in &batch.queries {
            counts[x.word() as usize] += 1;
        }
        let sigma = (0.25 * 0.75 / n as f64).sqrt();
        for &count in &counts {
            let freq = count as f64 / n as f64;
            assert!((freq - 0.25).abs() < 4.0 * sigma, "freq {freq}");
        }
    }

    #[test]
    fn sampled_distribution_close_to_born_table() {
        let model = QcbmModel::new(4, QcbmConfig { n_layers: 2, ..Default::default() }, 21)
            .unwrap();
        let n = 100_000usize;
        let batch = model.sample(n, 4);
        let mut counts = vec![0usize; 16];
        for x in &batch.queries {
            counts[x.word() as usize] += 1;
        }
        let tv: f64 = model
            .born_probabilities()
            .iter()
            .zip(&counts)
            .map(|(&p, &c)| (p - c as f64 / n as f64).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.02, "total variation {tv}");
    }

    #[test]
    fn one_qubit_training_converges() {
        let train = uniform_weight_train(1, &["1"]);
        let mut model = QcbmModel::new(
            1,
            QcbmConfig { n_layers: 1, sigma0: 0.1, ..Default::default() },
            13,
        )
        .unwrap();
        let trace = train_qcbm(&mut model, &train, 200, 0, |_, _, _| {}).unwrap();
        let final_kl = *trace.last().unwrap();
        assert!(final_kl < 1e-3, "kl after 200 generations: {final_kl}");
        // Elitist bookkeeping: the reported trace never increases.
        for pair in trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-15);
        }
    }

    #[test]
    fn training_rejects_dimension_mismatch() {
        let train = TrainingSet::build(6, 0.5, 1, None).unwrap();
        let mut model = QcbmModel::new(4, QcbmConfig::default(), 0).unwrap();
        assert!(matches!(
            model.train_step(&train),
            Err(TrainError::DimensionMismatch { model: "qcbm", model_n: 4, train_n: 6 })
        ));
    }

    #[test]
    fn exact_log_prob_matches_table() {
        let model = QcbmModel::new(3, QcbmConfig::default(), 5).unwrap();
        let space = SolutionSpace::new(3).unwrap();
        let x = space.member(2);
        let expected = model.born_probabilities()[x.word() as usize].ln();
        assert_eq!(model.exact_log_prob(&x), Some(expected));
        assert!(model.has_exact_log_prob());
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = std::env::temp_dir().join("genrace_qcbm_tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("ckpt.txt");
        let model = QcbmModel::new(4, QcbmConfig { n_layers: 3, ..Default::default() }, 11)
            .unwrap();
        model.save_checkpoint(&path).unwrap();
        let restored = QcbmModel::load_checkpoint(&path, QcbmConfig::default(), 0).unwrap();
        assert_eq!(restored.parameters(), model.parameters());
        assert_eq!(restored.ansatz().n_layers(), 3);
        assert_eq!(restored.born_probabilities(), model.born_probabilities());
        std::fs::remove_file(&path).unwrap();
    }
}

use ndarray::Array2;

use super::{grad_slices, Loss, Mode, NetworkModel};
use crate::error::{Error, Result};
use crate::numerics::RandomStream;

#[derive(Clone, Copy, Debug)]
pub struct GradCheckConfig {
    /// Central-difference half step.
    pub step: f64,
    /// Number of coordinates compared (all of them when there are fewer).
    pub samples: usize,
    pub mode: Mode,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-5,
            samples: 200,
            mode: Mode::Eval,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy)]
enum Coord {
    Param(usize, usize),
    Input(usize),
}

struct Probe<'a> {
    model: &'a NetworkModel<f64>,
    input: &'a Array2<f64>,
    loss: &'a dyn Loss<f64>,
    mode: Mode,
}

impl Probe<'_> {
    /// Loss value and combined kink signature after nudging one coordinate.
    fn eval(&self, coord: Coord, delta: f64) -> Result<(f64, Vec<bool>)> {
        let mut model = self.model.clone();
        let mut input = self.input.clone();
        match coord {
            Coord::Param(t, i) => model.trainable_mut()[t][i] += delta,
            Coord::Input(i) => input.as_slice_mut().expect("contiguous")[i] += delta,
        }
        let act = model.forward(&input, self.mode)?;
        let mut sig = act.kink_signature(model.specs());
        sig.extend(self.loss.kink_signature(act.output()));
        Ok((self.loss.value(act.output()), sig))
    }
}

/// Largest relative disagreement between the analytic gradient and central
/// finite differences, `|a − n| / max(1e-8, |a| + |n|)`, over a random subset
/// of parameter and input coordinates.
///
/// Coordinates whose difference stencil crosses a ReLU or loss kink are not
/// differentiable there and are replaced by fresh draws.
pub fn grad_check(
    model: &NetworkModel<f64>,
    input: &Array2<f64>,
    loss: &dyn Loss<f64>,
    cfg: &GradCheckConfig,
) -> Result<f64> {
    let mut base_model = model.clone();
    let act = base_model.forward(input, cfg.mode)?;
    let upstream = loss.gradient(act.output());
    let (grads, input_grad) = base_model.backward(&act, &upstream)?;
    let mut base_sig = act.kink_signature(base_model.specs());
    base_sig.extend(loss.kink_signature(act.output()));
    let analytic_params = grad_slices(&grads);

    let mut coords: Vec<Coord> = Vec::new();
    for (t, s) in analytic_params.iter().enumerate() {
        coords.extend((0..s.len()).map(|i| Coord::Param(t, i)));
    }
    coords.extend((0..input.len()).map(Coord::Input));

    // Fisher–Yates with the check's own stream; the prefix is the sample.
    let mut stream = RandomStream::new(cfg.seed, 0x6772_6164);
    for i in (1..coords.len()).rev() {
        let j = (stream.next_u64() % (i as u64 + 1)) as usize;
        coords.swap(i, j);
    }

    let probe = Probe {
        model,
        input,
        loss,
        mode: cfg.mode,
    };
    let want = cfg.samples.min(coords.len());
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for &coord in &coords {
        if checked == want {
            break;
        }
        let (plus, sig_p) = probe.eval(coord, cfg.step)?;
        let (minus, sig_m) = probe.eval(coord, -cfg.step)?;
        if sig_p != base_sig || sig_m != base_sig {
            continue;
        }
        let numeric = (plus - minus) / (2.0 * cfg.step);
        let analytic = match coord {
            Coord::Param(t, i) => analytic_params[t][i],
            Coord::Input(i) => input_grad.as_slice().expect("contiguous")[i],
        };
        let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8);
        worst = worst.max(rel);
        checked += 1;
    }
    if checked < want {
        return Err(Error::InvalidArgument(format!(
            "only {checked} of {want} coordinates were differentiable around the probe point"
        )));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autonet::{LayerSpec, MeanAbsoluteError, SquaredError};

    fn batch(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut s = RandomStream::new(seed, 1);
        Array2::from_shape_simple_fn((rows, cols), || s.standard_normal())
    }

    #[test]
    fn three_layer_net_with_l1_loss() {
        let specs = vec![
            LayerSpec::dense(6, 10),
            LayerSpec::Relu,
            LayerSpec::dense(10, 8),
            LayerSpec::Relu,
            LayerSpec::dense(8, 4),
            LayerSpec::Sigmoid,
        ];
        let model = NetworkModel::<f64>::init(&specs, &mut RandomStream::new(3, 0)).unwrap();
        let x = batch(5, 6, 1);
        let target = batch(5, 4, 2).mapv(|v| 0.5 + 0.2 * v);
        let err = grad_check(
            &model,
            &x,
            &MeanAbsoluteError { target: &target },
            &GradCheckConfig::default(),
        )
        .unwrap();
        assert!(err <= 1e-5, "{err}");
    }

    #[test]
    fn batchnorm_in_train_mode() {
        let specs = vec![
            LayerSpec::dense(6, 12),
            LayerSpec::batchnorm(12),
            LayerSpec::Relu,
            LayerSpec::dense(12, 5),
            LayerSpec::Sigmoid,
        ];
        let model = NetworkModel::<f64>::init(&specs, &mut RandomStream::new(4, 0)).unwrap();
        let x = batch(8, 6, 3);
        let target = batch(8, 5, 4);
        let cfg = GradCheckConfig {
            mode: Mode::Train,
            ..Default::default()
        };
        let err = grad_check(&model, &x, &SquaredError { target: &target }, &cfg).unwrap();
        assert!(err <= 1e-4, "{err}");
    }

    #[test]
    fn single_dense_layer_squared_loss() {
        let specs = vec![LayerSpec::dense(7, 3)];
        let model = NetworkModel::<f64>::init(&specs, &mut RandomStream::new(5, 0)).unwrap();
        let x = batch(4, 7, 5);
        let target = batch(4, 3, 6);
        let err = grad_check(
            &model,
            &x,
            &SquaredError { target: &target },
            &GradCheckConfig::default(),
        )
        .unwrap();
        assert!(err <= 1e-7, "{err}");
    }
}

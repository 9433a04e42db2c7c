//! Trajectory encoder: 1D convolution over time followed by stacked LSTMs.

use rand_chacha::ChaCha8Rng;

use crate::nn::{
    dropout_backward, dropout_forward, elu_backward_from_output, elu_inplace, Conv1d, DropoutMask,
    Lstm, LstmCache, ParamVisitor, Visitable,
};

use super::{EncoderError, EncoderParams, TrackFeature};

/// Shared by target history, neighbor histories and (with 2-d input) the
/// score heads' re-encoding of predicted trajectories.
#[derive(Debug, Clone)]
pub struct TrackEncoder {
    pub conv: Conv1d,
    pub lstms: Vec<Lstm>,
    pub dropout: f64,
    t_len: usize,
}

/// Activations of one batched forward pass, kept for backprop.
pub struct TrackEncoderCache {
    pub bsz: usize,
    /// conv input, time-major (t x b x feat)
    pub x: Vec<f64>,
    /// post-ELU conv output
    pub conv_out: Vec<f64>,
    /// inputs fed to each LSTM layer (first is conv_out, possibly dropped copies after)
    pub lstm_inputs: Vec<Vec<f64>>,
    pub lstm_caches: Vec<LstmCache>,
    pub masks: Vec<Option<DropoutMask>>,
}

impl TrackEncoder {
    pub fn new(
        feat_dim: usize,
        t_len: usize,
        params: &EncoderParams,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let conv = Conv1d::new(feat_dim, params.conv1d_channels, params.conv1d_kernel, rng);
        let mut lstms = Vec::with_capacity(params.lstm_layers);
        let mut in_dim = params.conv1d_channels;
        for _ in 0..params.lstm_layers {
            lstms.push(Lstm::new(in_dim, params.lstm_hidden, rng));
            in_dim = params.lstm_hidden;
        }
        TrackEncoder {
            conv,
            lstms,
            dropout: params.dropout,
            t_len,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.lstms.last().map(|l| l.hidden).unwrap_or(0)
    }

    pub fn t_len(&self) -> usize {
        self.t_len
    }

    pub fn input_dim(&self) -> usize {
        self.conv.in_c
    }

    /// Batched forward over time-major input (t_len x bsz x feat).
    /// Returns the final top-layer hidden state (bsz x hidden).
    pub fn forward_batch(
        &self,
        x: Vec<f64>,
        bsz: usize,
        train: bool,
        rng: Option<&mut ChaCha8Rng>,
    ) -> (Vec<f64>, TrackEncoderCache) {
        debug_assert_eq!(x.len(), self.t_len * bsz * self.conv.in_c);
        let mut conv_out = self.conv.forward(&x, bsz, self.t_len);
        elu_inplace(&mut conv_out);

        let mut cache = TrackEncoderCache {
            bsz,
            x,
            conv_out,
            lstm_inputs: Vec::with_capacity(self.lstms.len()),
            lstm_caches: Vec::with_capacity(self.lstms.len()),
            masks: Vec::with_capacity(self.lstms.len()),
        };

        let mut rng = rng;
        let mut current: Vec<f64> = cache.conv_out.clone();
        for (li, lstm) in self.lstms.iter().enumerate() {
            let mask = if li > 0 && train && self.dropout > 0.0 {
                let r = rng
                    .as_deref_mut()
                    .expect("training forward needs an rng for dropout");
                Some(dropout_forward(&mut current, self.dropout, r))
            } else {
                None
            };
            let lstm_cache = lstm.forward(&current, bsz, self.t_len);
            let next = lstm_cache.h.clone();
            cache
                .lstm_inputs
                .push(std::mem::replace(&mut current, next));
            cache.masks.push(mask);
            cache.lstm_caches.push(lstm_cache);
        }
        let feat = cache.lstm_caches.last().unwrap().last_h().to_vec();
        (feat, cache)
    }

    /// Backward from gradients on the final hidden state (bsz x hidden).
    pub fn backward_batch(
        &mut self,
        cache: &TrackEncoderCache,
        g_last: &[f64],
        want_gx: bool,
    ) -> Option<Vec<f64>> {
        let bsz = cache.bsz;
        let hd = self.feature_dim();
        debug_assert_eq!(g_last.len(), bsz * hd);

        // gradient enters at the last step of the top layer only
        let mut gh_seq = vec![0.0; self.t_len * bsz * hd];
        gh_seq[(self.t_len - 1) * bsz * hd..].copy_from_slice(g_last);

        for li in (0..self.lstms.len()).rev() {
            let lstm = &mut self.lstms[li];
            let mut gx = vec![0.0; self.t_len * bsz * lstm.in_dim];
            lstm.backward(
                &cache.lstm_inputs[li],
                &cache.lstm_caches[li],
                &gh_seq,
                &mut gx,
            );
            if let Some(mask) = &cache.masks[li] {
                dropout_backward(mask, &mut gx);
            }
            gh_seq = gx;
        }

        // gh_seq is now the gradient on the post-ELU conv output
        elu_backward_from_output(&cache.conv_out, &mut gh_seq);
        self.conv
            .backward(&cache.x, bsz, self.t_len, &gh_seq, want_gx)
    }

    /// Single-track evaluation per the encoder contract: exactly the history
    /// window, standardized features with invalid steps zeroed.
    pub fn encode(&self, std_feats: &[f64]) -> Result<TrackFeature, EncoderError> {
        let feat = self.conv.in_c;
        if std_feats.len() != self.t_len * feat {
            return Err(EncoderError::SequenceLength {
                expected: self.t_len,
                got: std_feats.len() / feat.max(1),
            });
        }
        let (out, _) = self.forward_batch(std_feats.to_vec(), 1, false, None);
        Ok(TrackFeature(out))
    }
}

impl Visitable for TrackEncoder {
    fn visit_params(&mut self, prefix: &str, v: &mut dyn ParamVisitor) {
        self.conv.visit_params(&format!("{prefix}.conv"), v);
        for (i, lstm) in self.lstms.iter_mut().enumerate() {
            lstm.visit_params(&format!("{prefix}.lstm{i}"), v);
        }
    }
}

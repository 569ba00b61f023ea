use crate::types::FrameConfig;

/// Zero padding added on each side of the signal before framing.
pub fn edge_pad(config: &FrameConfig) -> usize {
    config.edge_pad()
}

/// Number of frames the analysis produces for a signal of `len` samples
/// after edge padding; the final partial frame is zero-filled.
pub fn num_frames(len: usize, config: &FrameConfig) -> usize {
    let padded = len + 2 * config.edge_pad();
    if padded <= config.window_len {
        1
    } else {
        (padded - config.window_len).div_ceil(config.hop) + 1
    }
}

/// Length of the overlap-add buffer for `n_frames` frames.
pub fn ola_length(n_frames: usize, config: &FrameConfig) -> usize {
    (n_frames.max(1) - 1) * config.hop + config.window_len
}

/// Copies frame `t` of the edge-padded signal into `out` and applies the
/// window. Positions outside the real signal read as zero.
pub(crate) fn windowed_frame(
    signal: &[f32],
    t: usize,
    config: &FrameConfig,
    window: &[f64],
    out: &mut [f64],
) {
    let pad = config.edge_pad() as isize;
    let start = t as isize * config.hop as isize - pad;
    for (k, o) in out.iter_mut().enumerate().take(config.window_len) {
        let idx = start + k as isize;
        *o = if idx >= 0 && (idx as usize) < signal.len() {
            signal[idx as usize] as f64 * window[k]
        } else {
            0.0
        };
    }
    for o in out.iter_mut().skip(config.window_len) {
        *o = 0.0;
    }
}

/// Weighted overlap-add synthesis state shared by ISTFT and ISTDCT: windows
/// each synthesized frame, accumulates it, and divides by the summed
/// squared-window envelope.
pub(crate) fn overlap_add(
    frames: impl Iterator<Item = Vec<f64>>,
    n_frames: usize,
    config: &FrameConfig,
    window: &[f64],
    pad_lead: usize,
    out_len: usize,
) -> Vec<f32> {
    let ola_len = ola_length(n_frames, config);
    let mut acc = vec![0.0f64; ola_len];
    for (t, frame) in frames.enumerate() {
        let base = t * config.hop;
        for (k, w) in window.iter().enumerate() {
            acc[base + k] += frame[k] * w;
        }
    }
    let env = crate::window::cola_envelope(window, config.hop, n_frames);
    let end = (pad_lead + out_len).min(ola_len);
    let mut out: Vec<f32> = acc[pad_lead..end]
        .iter()
        .zip(&env[pad_lead..end])
        .map(|(a, e)| (a / e.max(1e-300)) as f32)
        .collect();
    out.resize(out_len, 0.0);
    out
}

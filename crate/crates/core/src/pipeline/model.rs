//! The full two-stage model: both sub-networks over one parameter store.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use fdfnet_dsp::FrameConfig;
use fdfnet_nn::params::ParamStore;
use fdfnet_nn::real::Real;

use crate::error::CoreError;
use crate::models::{DsrConfig, DsrNet, FmeConfig, FmeNet};
use crate::pipeline::bridge::{mag_feature_scale, DCT_FEATURE_SCALE};

pub struct FdfNet<R: Real> {
    pub frame: FrameConfig,
    pub fme_cfg: FmeConfig,
    pub dsr_cfg: DsrConfig,
    pub params: ParamStore<R>,
    pub fme: FmeNet,
    pub dsr: DsrNet,
    /// Magnitude spectra are scaled by this before entering the networks.
    pub mag_scale: f64,
    /// Cosine spectra are scaled by this before entering the networks.
    pub dct_scale: f64,
}

impl<R: Real> FdfNet<R> {
    pub fn new(
        frame: FrameConfig,
        fme_cfg: &FmeConfig,
        dsr_cfg: &DsrConfig,
        seed: u64,
    ) -> Result<Self, CoreError> {
        frame.validate()?;
        fme_cfg.validate()?;
        dsr_cfg.validate()?;
        if fme_cfg.input_bins != frame.fourier_bins() {
            return Err(CoreError::Config(format!(
                "stage-1 input bins {} do not match transform ({})",
                fme_cfg.input_bins,
                frame.fourier_bins()
            )));
        }
        if dsr_cfg.input_bins != frame.cosine_bins() {
            return Err(CoreError::Config(format!(
                "stage-2 input bins {} do not match transform ({})",
                dsr_cfg.input_bins,
                frame.cosine_bins()
            )));
        }
        let mut params = ParamStore::new();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let fme = FmeNet::new(&mut params, &mut rng, fme_cfg);
        let dsr = DsrNet::new(&mut params, &mut rng, dsr_cfg);
        Ok(Self {
            frame,
            fme_cfg: fme_cfg.clone(),
            dsr_cfg: dsr_cfg.clone(),
            params,
            fme,
            dsr,
            mag_scale: mag_feature_scale(&frame),
            dct_scale: DCT_FEATURE_SCALE,
        })
    }

    pub fn with_defaults(seed: u64) -> Result<Self, CoreError> {
        Self::new(FrameConfig::default(), &FmeConfig::default(), &DsrConfig::default(), seed)
    }
}

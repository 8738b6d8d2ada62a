//! Primal-dual fixed-point (PDFP) iteration with automatic
//! controlled-sparsity tuning of the thresholding parameter, plus the
//! dynamic (3D transform) and static per-frame reconstruction drivers and
//! temporal inflation helpers.
//!
//! The minimized functional is
//! `1/2 ||A f - y||^2 + alpha ||B f||_1  subject to  f >= 0`
//! where `A` is the (normalized) forward projector and `B` a sparsifying
//! transform. One PDFP iterate computes, with gradient
//! `g = A'(A f - y)` evaluated once per step:
//!
//! ```text
//! d  = P+( f - gamma g - lambda B' v )
//! v+ = (Id - S_t)( B d + v ),          t = alpha gamma / lambda
//! f+ = P+( f - gamma g - lambda B' v+ )
//! ```
//!
//! `P+` is the projection onto the nonnegative orthant and `S_t` the
//! soft-thresholding operator. The controller adjusts `alpha` after every
//! iteration so that the fraction of transform coefficients of the iterate
//! above a magnitude `kappa` approaches a prescribed target sparsity.

use crate::error::{Error, Result};
use crate::linop::{dot, norm2, BlockDiagMap, LinearMap};
use crate::types::{SinogramStack, VolumeStack};

/// Componentwise soft-thresholding `S_alpha`.
///
/// `x - alpha` above `alpha`, zero on `[-alpha, alpha]`, `x + alpha` below.
pub fn soft_threshold(x: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if alpha < 0.0 || !alpha.is_finite() {
        return Err(Error::InvalidArgument(
            "soft threshold requires alpha >= 0".into(),
        ));
    }
    Ok(x.iter().map(|&v| soft_threshold_scalar(v, alpha)).collect())
}

#[inline]
pub(crate) fn soft_threshold_scalar(x: f64, alpha: f64) -> f64 {
    if x > alpha {
        x - alpha
    } else if x < -alpha {
        x + alpha
    } else {
        0.0
    }
}

/// Projection onto the nonnegative orthant, componentwise `max(0, x)`.
pub fn nonneg_project(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

fn nonneg_project_inplace(x: &mut [f64]) {
    for v in x.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Objective `1/2 ||A f - y||^2 + alpha ||B f||_1`.
pub fn objective_value(
    f: &[f64],
    y: &[f64],
    a: &dyn LinearMap,
    sh: &dyn LinearMap,
    alpha: f64,
) -> Result<f64> {
    if f.len() != a.input_len() || y.len() != a.output_len() || f.len() != sh.input_len() {
        return Err(Error::ShapeMismatch(format!(
            "objective: f {} / y {} vs operator {}x{} and transform input {}",
            f.len(),
            y.len(),
            a.output_len(),
            a.input_len(),
            sh.input_len()
        )));
    }
    let af = a.apply(f);
    let resid2: f64 = af.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
    let l1: f64 = sh.apply(f).iter().map(|v| v.abs()).sum();
    Ok(0.5 * resid2 + alpha * l1)
}

/// Fixed PDFP parameters. With normalized operators the admissible ranges
/// are `0 < gamma < 2` and `0 < lambda < 1`.
#[derive(Debug, Clone)]
pub struct PdfpConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub max_iters: usize,
    /// Record the objective once per iteration (one extra forward
    /// application); disable for timing runs.
    pub record_objective: bool,
    /// Threshold the dual update with the previous iteration's alpha instead
    /// of the freshly updated one. Default is the fresh value, which keeps
    /// the controller one step ahead; this flag restores the literal
    /// pseudocode indexing.
    pub stale_dual_threshold: bool,
}

impl Default for PdfpConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            lambda: 0.99,
            max_iters: 300,
            record_objective: true,
            stale_dual_threshold: false,
        }
    }
}

/// Controlled-sparsity parameters.
#[derive(Debug, Clone)]
pub struct CwdsConfig {
    /// Target fraction of transform coefficients above `kappa`.
    pub c_pr: f64,
    /// Initial controller step factor: `beta = omega * alpha0`.
    pub omega: f64,
    /// Magnitude threshold used when counting coefficients.
    pub kappa: f64,
    /// Initial thresholding factor: `alpha0 = zeta * (mean of top coeffs)`.
    pub zeta: f64,
    /// Sparsity tolerance.
    pub delta1: f64,
    /// Relative-change tolerance.
    pub delta2: f64,
}

impl CwdsConfig {
    pub fn new(c_pr: f64, omega: f64, kappa: f64, zeta: f64) -> Self {
        Self {
            c_pr,
            omega,
            kappa,
            zeta,
            delta1: 0.01,
            delta2: 0.003,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.c_pr) {
            return Err(Error::InvalidArgument("c_pr must be in [0, 1]".into()));
        }
        for (name, v) in [
            ("omega", self.omega),
            ("kappa", self.kappa),
            ("zeta", self.zeta),
            ("delta1", self.delta1),
            ("delta2", self.delta2),
        ] {
            if v <= 0.0 || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// All evolving solver quantities.
#[derive(Debug, Clone)]
pub struct CwdsState {
    /// Primal iterate (flattened stack).
    pub f: Vec<f64>,
    /// Dual iterate in the transform domain.
    pub v: Vec<f64>,
    /// Current thresholding parameter.
    pub alpha: f64,
    /// Controller step size.
    pub beta: f64,
    /// Sparsity error of the previous iteration.
    pub e_prev: f64,
    /// Most recent sparsity error.
    pub e_curr: f64,
    /// Sparsity level of the current iterate.
    pub c_level: f64,
    pub iter: usize,
    /// Relative change of the primal iterate.
    pub rel_change: f64,
}

impl CwdsState {
    pub fn initial(input_len: usize, dual_len: usize, alpha0: f64, beta0: f64) -> Self {
        Self {
            f: vec![0.0; input_len],
            v: vec![0.0; dual_len],
            alpha: alpha0,
            beta: beta0,
            e_prev: 1.0,
            e_curr: 1.0,
            c_level: 1.0,
            iter: 0,
            rel_change: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum StopReason {
    /// Both the sparsity error and the relative change fell below tolerance.
    Converged,
    /// The iteration cap was reached first.
    IterationCap,
}

/// Summary of one solver run.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_sparsity: f64,
    pub final_alpha: f64,
    /// Objective at iterate 0 and after every iteration (empty when
    /// recording is disabled). Each entry uses the alpha in effect for that
    /// iterate.
    pub objective_trace: Vec<f64>,
    pub stop_reason: StopReason,
    pub total_seconds: f64,
}

/// Fraction of transform coefficients of `reference` with magnitude above
/// `kappa`; the a-priori sparsity target computed from ground truth or a
/// dense-angle reconstruction.
pub fn a_priori_sparsity(reference: &[f64], sh: &dyn LinearMap, kappa: f64) -> f64 {
    let c = sh.apply(reference);
    count_above(&c, kappa) as f64 / c.len() as f64
}

fn count_above(c: &[f64], kappa: f64) -> usize {
    c.iter().filter(|v| v.abs() > kappa).count()
}

/// Initial thresholding parameter: `zeta` times the mean of the `h` largest
/// magnitudes of `B A' y`, where `h = ceil((1 - c_pr) * total coefficient
/// count)`. With the undecimated transforms used here the count is taken
/// over all coefficients, which keeps the mean well defined.
pub fn init_threshold(
    y: &[f64],
    a: &dyn LinearMap,
    sh: &dyn LinearMap,
    c_pr: f64,
    zeta: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&c_pr) {
        return Err(Error::InvalidArgument("c_pr must be in [0, 1]".into()));
    }
    let at_y = a.apply_adjoint(y);
    init_threshold_from_adjoint(&at_y, sh, c_pr, zeta)
}

fn init_threshold_from_adjoint(
    at_y: &[f64],
    sh: &dyn LinearMap,
    c_pr: f64,
    zeta: f64,
) -> Result<f64> {
    let mut mags: Vec<f64> = sh.apply(at_y).iter().map(|v| v.abs()).collect();
    let total = mags.len();
    let h = ((1.0 - c_pr) * total as f64).ceil() as usize;
    if h == 0 {
        return Err(Error::InvalidArgument(
            "c_pr = 1 leaves no coefficients to average".into(),
        ));
    }
    let h = h.min(total);
    // Mean of the h largest magnitudes.
    mags.select_nth_unstable_by(total - h, |a, b| a.partial_cmp(b).unwrap());
    let top = &mags[total - h..];
    Ok(zeta * top.iter().sum::<f64>() / h as f64)
}

/// One controller update: returns the next `(alpha, beta, e)`.
///
/// The step size shrinks when the sparsity error changes sign (skipped at
/// iteration 0 where the older error is undefined); the shrink factor is
/// clamped at zero so `beta` never increases or turns negative.
pub fn cwds_controller_update(state: &CwdsState, c_pr: f64) -> (f64, f64, f64) {
    let e_next = state.c_level - c_pr;
    let mut beta = state.beta;
    if state.iter >= 1 && sgn(e_next) != sgn(state.e_curr) {
        beta *= (1.0 - (state.e_curr - state.e_prev).abs()).max(0.0);
    }
    let alpha = (state.alpha + beta * e_next).max(0.0);
    (alpha, beta, e_next)
}

fn sgn(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

fn check_finite_iterate(f: &[f64], v: &[f64]) -> Result<()> {
    if f.iter().any(|x| !x.is_finite()) || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric(
            "divergence: check normalization and gamma, lambda".into(),
        ));
    }
    Ok(())
}

/// One PDFP step on `state` with threshold parameter `alpha`; `at_y` caches
/// `A' y` and `sht_v` caches `B' v` from the previous step (pass `None` to
/// recompute). Returns the transform coefficients of the new iterate's
/// intermediate `B d` consumers do not need; the caller tracks sparsity
/// from `B f` separately.
fn pdfp_step_inner(
    state: &mut CwdsState,
    a: &dyn LinearMap,
    sh: &dyn LinearMap,
    at_y: &[f64],
    cfg: &PdfpConfig,
    alpha: f64,
    sht_v: Option<Vec<f64>>,
) -> Result<Vec<f64>> {
    let gamma = cfg.gamma;
    let lambda = cfg.lambda;
    let threshold = alpha * gamma / lambda;

    // Gradient term A'(A f) - A'y, computed once and reused in both primal
    // updates.
    let mut base = a.apply_adjoint(&a.apply(&state.f));
    for ((b, &fv), &ay) in base.iter_mut().zip(&state.f).zip(at_y) {
        *b = fv - gamma * (*b - ay);
    }

    let sht_v = match sht_v {
        Some(c) => c,
        None => sh.apply_adjoint(&state.v),
    };
    let mut d = base.clone();
    for (dv, sv) in d.iter_mut().zip(&sht_v) {
        *dv -= lambda * sv;
    }
    nonneg_project_inplace(&mut d);

    // Dual update: v+ = (Id - S_t)(B d + v).
    let mut w = sh.apply(&d);
    for (wv, vv) in w.iter_mut().zip(&state.v) {
        let s = *wv + vv;
        *wv = s - soft_threshold_scalar(s, threshold);
    }
    state.v = w;

    let sht_v_new = sh.apply_adjoint(&state.v);
    let mut f_new = base;
    for (fv, sv) in f_new.iter_mut().zip(&sht_v_new) {
        *fv -= lambda * sv;
    }
    nonneg_project_inplace(&mut f_new);

    check_finite_iterate(&f_new, &state.v)?;
    state.f = f_new;
    Ok(sht_v_new)
}

/// One public PDFP step (recomputes the cached quantities; the run loops
/// below reuse them across iterations, which is bitwise equivalent).
pub fn pdfp_step(
    state: &mut CwdsState,
    a: &dyn LinearMap,
    sh: &dyn LinearMap,
    y: &[f64],
    cfg: &PdfpConfig,
    alpha: f64,
) -> Result<()> {
    if alpha < 0.0 {
        return Err(Error::InvalidArgument("alpha must be >= 0".into()));
    }
    let at_y = a.apply_adjoint(y);
    pdfp_step_inner(state, a, sh, &at_y, cfg, alpha, None)?;
    Ok(())
}

/// Core controlled-sparsity PDFP loop on flat vectors.
///
/// Preconditions: `a` is normalized (spectral norm <= 1) and `y` is the
/// correspondingly scaled data; `sh` has upper frame bound <= 1.
pub fn run_cwds_pdfp_flat(
    y: &[f64],
    a: &dyn LinearMap,
    sh: &dyn LinearMap,
    pdfp: &PdfpConfig,
    cwds: &CwdsConfig,
) -> Result<(Vec<f64>, SolveReport)> {
    cwds.validate()?;
    if y.len() != a.output_len() {
        return Err(Error::ShapeMismatch(format!(
            "data length {} != operator output {}",
            y.len(),
            a.output_len()
        )));
    }
    if a.input_len() != sh.input_len() {
        return Err(Error::ShapeMismatch(format!(
            "operator input {} != transform input {}",
            a.input_len(),
            sh.input_len()
        )));
    }
    let started = std::time::Instant::now();
    let at_y = a.apply_adjoint(y);
    let alpha0 = init_threshold_from_adjoint(&at_y, sh, cwds.c_pr, cwds.zeta)?;
    let beta0 = cwds.omega * alpha0;
    let total_coeffs = sh.output_len() as f64;

    let mut state = CwdsState::initial(a.input_len(), sh.output_len(), alpha0, beta0);
    let mut sht_v_cache: Option<Vec<f64>> = Some(vec![0.0; a.input_len()]); // B' 0 = 0
    let mut trace = Vec::new();
    if pdfp.record_objective {
        // f = 0: objective is 1/2 ||y||^2.
        trace.push(0.5 * dot(y, y));
    }

    while state.iter < pdfp.max_iters
        && (state.e_curr.abs() >= cwds.delta1 || state.rel_change >= cwds.delta2)
    {
        let (alpha_next, beta_next, e_next) = cwds_controller_update(&state, cwds.c_pr);
        let alpha_used = if pdfp.stale_dual_threshold {
            state.alpha
        } else {
            alpha_next
        };

        let f_prev = state.f.clone();
        let sht_v = sht_v_cache.take();
        sht_v_cache = Some(pdfp_step_inner(
            &mut state, a, sh, &at_y, pdfp, alpha_used, sht_v,
        )?);

        let shf = sh.apply(&state.f);
        let c_next = count_above(&shf, cwds.kappa) as f64 / total_coeffs;

        let mut diff2 = 0.0;
        for (nf, of) in state.f.iter().zip(&f_prev) {
            diff2 += (nf - of) * (nf - of);
        }
        let nf = norm2(&state.f);
        state.rel_change = if nf > 0.0 {
            diff2.sqrt() / nf
        } else if diff2 == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };

        if pdfp.record_objective {
            let af = a.apply(&state.f);
            let resid2: f64 = af.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
            let l1: f64 = shf.iter().map(|v| v.abs()).sum();
            trace.push(0.5 * resid2 + alpha_next * l1);
        }

        state.e_prev = state.e_curr;
        state.e_curr = e_next;
        state.alpha = alpha_next;
        state.beta = beta_next;
        state.c_level = c_next;
        state.iter += 1;
    }

    let converged = state.e_curr.abs() < cwds.delta1 && state.rel_change < cwds.delta2;
    let report = SolveReport {
        iterations: state.iter,
        final_sparsity: state.c_level,
        final_alpha: state.alpha,
        objective_trace: trace,
        stop_reason: if converged {
            StopReason::Converged
        } else {
            StopReason::IterationCap
        },
        total_seconds: started.elapsed().as_secs_f64(),
    };
    Ok((state.f, report))
}

/// Dynamic reconstruction: controlled-sparsity PDFP on the full space-time
/// stack with a 3D (or any stack-wide) sparsifying transform.
///
/// `a` must be the normalized block operator and `y` the matching scaled
/// data; `image_side` fixes the per-frame image size of the result.
pub fn run_cwds_pdfp(
    y: &SinogramStack,
    a: &dyn LinearMap,
    sh: &dyn LinearMap,
    pdfp: &PdfpConfig,
    cwds: &CwdsConfig,
    image_side: usize,
) -> Result<(VolumeStack, SolveReport)> {
    let t = y.frames();
    if a.input_len() != image_side * image_side * t {
        return Err(Error::ShapeMismatch(format!(
            "operator input {} != {}^2 x {} frames",
            a.input_len(),
            image_side,
            t
        )));
    }
    let (f, report) = run_cwds_pdfp_flat(&y.to_flat(), a, sh, pdfp, cwds)?;
    Ok((VolumeStack::new(image_side, image_side, t, f)?, report))
}

/// Static per-frame reconstruction: every frame runs its own PDFP step
/// sequence through its per-frame operator, while a single controller
/// drives one alpha from the average sparsity over frames.
///
/// `frame_ops` holds either one operator shared by all frames or one per
/// frame. With equally sized frames the average of per-frame sparsity
/// levels equals the pooled level, so this is exactly the block-diagonal
/// run; for T = 1 it reduces to `run_cwds_pdfp` with the same 2D
/// transform.
pub fn run_static_cwds_pdfp<A: LinearMap, S: LinearMap>(
    y: &SinogramStack,
    frame_ops: &[A],
    transform2d: &S,
    pdfp: &PdfpConfig,
    cwds: &CwdsConfig,
    image_side: usize,
) -> Result<(VolumeStack, SolveReport)> {
    let t = y.frames();
    if frame_ops.len() != 1 && frame_ops.len() != t {
        return Err(Error::ShapeMismatch(format!(
            "expected 1 or {t} per-frame operators, got {}",
            frame_ops.len()
        )));
    }
    let sh = BlockDiagMap::new(transform2d, t);
    if frame_ops.len() == 1 {
        let a = BlockDiagMap::new(&frame_ops[0], t);
        run_cwds_pdfp(y, &a, &sh, pdfp, cwds, image_side)
    } else {
        let a = crate::linop::BlockDiagList::new(frame_ops.iter().collect::<Vec<_>>())?;
        run_cwds_pdfp(y, &a, &sh, pdfp, cwds, image_side)
    }
}

/// How replicated frames are merged back after temporal inflation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum CombineMode {
    /// Average the replicates of each original frame.
    Average,
    /// Keep the middle replicate of each original frame.
    Middle,
}

fn replicate_counts(original: usize, target: usize) -> Result<Vec<usize>> {
    if target < original {
        return Err(Error::InvalidArgument(format!(
            "inflation target {target} below frame count {original}"
        )));
    }
    let rep = target.div_ceil(original);
    let counts: Vec<usize> = (0..original)
        .map(|t| rep.min(target.saturating_sub(t * rep)))
        .collect();
    if counts.iter().any(|&c| c == 0) {
        return Err(Error::InvalidArgument(format!(
            "inflating {original} frames to {target} truncates trailing frames; \
             pick a multiple of the frame count"
        )));
    }
    Ok(counts)
}

/// Repeat each frame `ceil(target/T)` times, truncated to exactly `target`
/// frames. Short stacks are inflated this way before a 3D transform that
/// needs a minimum temporal extent.
pub fn inflate_frames(stack: &VolumeStack, target: usize) -> Result<VolumeStack> {
    let counts = replicate_counts(stack.frames(), target)?;
    let mut frames = Vec::with_capacity(target);
    for (t, &c) in counts.iter().enumerate() {
        for _ in 0..c {
            frames.push(stack.frame_image(t));
        }
    }
    VolumeStack::from_frames(frames)
}

/// Sinogram-stack counterpart of [`inflate_frames`].
pub fn inflate_sinogram_frames(stack: &SinogramStack, target: usize) -> Result<SinogramStack> {
    let counts = replicate_counts(stack.frames(), target)?;
    let mut sinos = Vec::with_capacity(target);
    for (t, &c) in counts.iter().enumerate() {
        for _ in 0..c {
            sinos.push(stack.frame(t).clone());
        }
    }
    SinogramStack::new(sinos)
}

/// Invert [`inflate_frames`]: merge the replicates of each original frame
/// by averaging or by picking the middle replicate.
pub fn combine_frames(
    stack: &VolumeStack,
    original_frames: usize,
    mode: CombineMode,
) -> Result<VolumeStack> {
    let counts = replicate_counts(original_frames, stack.frames())?;
    let n = stack.frame_len();
    let mut frames = Vec::with_capacity(original_frames);
    let mut start = 0usize;
    for &c in &counts {
        let mut data = vec![0.0; n];
        match mode {
            CombineMode::Average => {
                for r in 0..c {
                    for (o, v) in data.iter_mut().zip(stack.frame(start + r)) {
                        *o += v;
                    }
                }
                for o in data.iter_mut() {
                    *o /= c as f64;
                }
            }
            CombineMode::Middle => {
                data.copy_from_slice(stack.frame(start + c / 2));
            }
        }
        frames.push(crate::types::Image2D::new(stack.width(), stack.height(), data)?);
        start += c;
    }
    VolumeStack::from_frames(frames)
}

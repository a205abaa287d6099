//! Park transform, sliding Fourier coefficients and the derivative rules of
//! the three phasor representations.

use std::f64::consts::PI;

use dqgrid::phasor::{
    derivative_rule_residual, inverse_park, park_transform, sliding_coefficient, DerivativeCheck, Envelope, Frame,
    FrameAngle, Representation, ThreePhaseSample, UniformSamples, OMEGA_S,
};

fn main() -> dqgrid::Result<()> {
    let t = 0.0042;
    let set = ThreePhaseSample::balanced(1.2, OMEGA_S * t + 0.3);
    let angle = FrameAngle::synchronous(t);
    let (p, zero) = park_transform(&set, &angle);
    println!("balanced set at t = {t} s -> d = {:.6}, q = {:.6}, zero = {zero:.1e}", p.re, p.im);
    let back = inverse_park(&p, zero, &angle)?;
    println!("inverse: a = {:.6} (was {:.6})", back.a, set.a);

    let rotated = FrameAngle::new(Frame::Synchronous, angle.rho - 0.3, 1.0);
    let (pr, _) = park_transform(&set, &rotated);
    println!("frame lagging by 0.3 rad sees angle {:.6} rad", pr.arg());

    let fs = 10_000.0;
    let x = UniformSamples::from_fn(0.0, 1.0 / fs, 400, |t| 1.3 * (OMEGA_S * t + 0.4).cos());
    let period = 2.0 * PI / OMEGA_S;
    for k in 0..3 {
        let c = sliding_coefficient(&x, k, period, x.time(399))?;
        println!("<x>_{k} = {:.8} at angle {:.6}", c.value.norm(), c.value.arg());
    }

    let env = Envelope::new(
        |t| 1.0 + 0.1 * (2.0 * PI * 5.0 * t).sin(),
        |t| PI * (2.0 * PI * 5.0 * t).cos(),
        |_| 0.0,
        |_| 0.0,
        2.0 * PI * 5.0,
    );
    let check = DerivativeCheck {
        envelope: &env,
        omega_s: OMEGA_S,
        frame: None,
        t_start: 0.05,
        t_end: 0.1,
        sample_rate: fs,
    };
    for rep in [
        Representation::Baseband,
        Representation::SpacePhasor,
        Representation::GeneralizedAveraging { k: 1 },
    ] {
        println!("{rep:?}: max residual {:.2e}", derivative_rule_residual(rep, &check)?);
    }
    Ok(())
}

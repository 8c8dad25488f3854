//! Exponentiated Weibull density, quantiles, sampling and maximum-likelihood
//! fitting.
//!
//!     cargo run --release --example weibull_fit

use rewod::rng::Rng;
use rewod::weibull::{fit_mle_with, ErrorSamples, ExpWeibull, FitOptions};

fn main() -> rewod::Result<()> {
    let truth = ExpWeibull::new(1.8, 1.3, 2.5)?;
    for x in [0.5, 1.0, 2.5, 5.0] {
        println!("x {x:>4}: pdf {:.5} cdf {:.5}", truth.pdf(x)?, truth.cdf(x));
    }
    println!("median {:.4}, 95% quantile {:.4}", truth.median(), truth.inverse_cdf(0.95));

    let mut rng = Rng::new(42);
    for n in [500, 5_000, 50_000] {
        let s = ErrorSamples::new((0..n).map(|_| truth.sample(&mut rng)).collect())?;
        let fit = fit_mle_with(&s, &FitOptions::default())?;
        println!(
            "n {n:>6}: a {:.3} c {:.3} lambda {:.3}  loglik fit {:.1} vs truth {:.1}",
            fit.model.a,
            fit.model.c,
            fit.model.lambda,
            fit.log_likelihood,
            truth.log_likelihood(&s)
        );
    }

    // too few samples is a typed error
    let tiny = ErrorSamples::new(vec![1.0, 2.0, 3.0])?;
    if let Err(e) = fit_mle_with(&tiny, &FitOptions::default()) {
        println!("3 samples: {e}");
    }
    Ok(())
}

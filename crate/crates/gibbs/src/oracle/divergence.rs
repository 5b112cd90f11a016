use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::grid::GridPosterior;
use crate::Real;

/// The four divergences between two grid posteriors on the same grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Divergences {
    pub kl_pq: Real,
    pub kl_qp: Real,
    pub hellinger: Real,
    pub tv: Real,
}

impl Divergences {
    pub fn min_kl(&self) -> Real {
        self.kl_pq.min(self.kl_qp)
    }

    /// The Bretagnolle-Huber chain d_H^2 <= d_TV <= sqrt(1 - e^{-min KL}),
    /// allowing `slack` for quadrature rounding.
    pub fn bretagnolle_huber_holds(&self, slack: Real) -> bool {
        let upper = (1.0 - (-self.min_kl()).exp()).max(0.0).sqrt();
        self.hellinger * self.hellinger <= self.tv + slack && self.tv <= upper + slack
    }
}

/// KL(p||q), KL(q||p), Hellinger, and total variation by trapezoid
/// quadrature. Zero-density points of p contribute nothing to KL(p||q);
/// points where q vanishes but p does not make KL(p||q) = +inf (reported,
/// not an error).
pub fn divergences(p: &GridPosterior, q: &GridPosterior) -> Result<Divergences> {
    if p.axes() != q.axes() {
        return Err(Error::Config("divergences require a common grid".into()));
    }
    let w = p.quad_weights();
    let (lp, lq) = (p.log_density(), q.log_density());
    let mut kl_pq = 0.0;
    let mut kl_qp = 0.0;
    let mut h2 = 0.0;
    let mut tv = 0.0;
    for k in 0..lp.len() {
        let (pd, qd) = (lp[k].exp(), lq[k].exp());
        if pd > 0.0 {
            kl_pq += if qd > 0.0 { w[k] * pd * (lp[k] - lq[k]) } else { Real::INFINITY };
        }
        if qd > 0.0 {
            kl_qp += if pd > 0.0 { w[k] * qd * (lq[k] - lp[k]) } else { Real::INFINITY };
        }
        let ds = pd.sqrt() - qd.sqrt();
        h2 += 0.5 * w[k] * ds * ds;
        tv += 0.5 * w[k] * (pd - qd).abs();
    }
    // quadrature rounding can push tiny true values below zero
    Ok(Divergences {
        kl_pq: kl_pq.max(0.0),
        kl_qp: kl_qp.max(0.0),
        hellinger: h2.max(0.0).sqrt().min(1.0),
        tv: tv.clamp(0.0, 1.0),
    })
}

use crate::analysis::talenti_bubble;
use crate::error::{Error, Result};
use crate::functionals::ProblemData;
use crate::mesh::operators::power_integral_raw;
use crate::mesh::{Field, Point};
use crate::scalar::{lit, to_f64, Real};

/// Smallest bubble scale, in mesh spacings, the splitting check accepts.
pub const MIN_SCALE_SPACINGS: f64 = 4.0;

/// |∫K|u + B|^{q+1} − ∫K|B|^{q+1} − ∫K|u|^{q+1}| for the truncated bubble
/// B of scale `eps` at `center`.
pub fn brezis_lieb_check<T: Real>(data: &ProblemData<T>, u: &Field<T>, eps: T, center: &Point<T>) -> Result<T> {
    data.check(u)?;
    let limit = data.mesh().spacing() * lit(MIN_SCALE_SPACINGS);
    if !(eps >= limit) {
        return Err(Error::Resolution { scale: to_f64(eps), limit: to_f64(limit) });
    }
    let bubble = talenti_bubble(data.mesh(), center, eps)?;
    let sum: Vec<T> = u.values().iter().zip(bubble.values()).map(|(a, b)| *a + *b).collect();
    let w = data.mesh().weights();
    let k = data.coefficient();
    let p = data.critical_power();
    let whole = power_integral_raw(w, k, &sum, p);
    let remainder = power_integral_raw(w, k, bubble.values(), p);
    let limit_part = power_integral_raw(w, k, u.values(), p);
    Ok((whole - remainder - limit_part).abs())
}

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use super::config::ConstellationKind;

#[inline]
fn gray(i: u32) -> u32 {
    i ^ (i >> 1)
}

/// Gray-labelled symbol alphabet.
///
/// `points[i]` carries label `labels[i]`; labels are written MSB first into
/// bit streams.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    kind: ConstellationKind,
    points: Vec<Complex64>,
    labels: Vec<u32>,
    /// point index for each label
    by_label: Vec<usize>,
    bits_per_symbol: usize,
    half_width: f64,
}

impl Constellation {
    pub fn new(kind: ConstellationKind, energy: f64) -> Self {
        let amp = libm::sqrt(energy);
        let (points, labels): (Vec<_>, Vec<_>) = match kind {
            ConstellationKind::Qpsk => {
                let a = amp / libm::sqrt(2.0);
                (0..4u32)
                    .map(|l| {
                        let re = if l & 0b10 == 0 { a } else { -a };
                        let im = if l & 0b01 == 0 { a } else { -a };
                        (Complex64::new(re, im), l)
                    })
                    .unzip()
            }
            ConstellationKind::Psk8 => (0..8u32)
                .map(|k| {
                    let (s, c) = libm::sincos(2.0 * PI * k as f64 / 8.0);
                    (Complex64::new(amp * c, amp * s), gray(k))
                })
                .unzip(),
            ConstellationKind::Qam16 => {
                let a = amp / libm::sqrt(10.0);
                let levels = [-3.0, -1.0, 1.0, 3.0];
                let mut pts = Vec::with_capacity(16);
                for i in 0..4u32 {
                    for q in 0..4u32 {
                        let label = (gray(i) << 2) | gray(q);
                        pts.push((Complex64::new(a * levels[i as usize], a * levels[q as usize]), label));
                    }
                }
                pts.into_iter().unzip()
            }
        };
        let mut by_label = alloc::vec![0; points.len()];
        for (i, &l) in labels.iter().enumerate() {
            by_label[l as usize] = i;
        }
        let half_width = points
            .iter()
            .map(|p| p.re.abs().max(p.im.abs()))
            .fold(0.0, f64::max);
        let bits_per_symbol = points.len().trailing_zeros() as usize;
        Self {
            kind,
            points,
            labels,
            by_label,
            bits_per_symbol,
            half_width,
        }
    }

    pub fn kind(&self) -> ConstellationKind {
        self.kind
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    /// `S_X = max over points of max(|Re|, |Im|)`
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn point_for_label(&self, label: u32) -> Complex64 {
        self.points[self.by_label[label as usize]]
    }

    /// Index of the nearest point; ties go to the lowest index.
    pub fn nearest(&self, z: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Packs `bits_per_symbol` bits (MSB first) into a label.
    pub fn label_from_bits(&self, bits: &[u8]) -> u32 {
        bits.iter().fold(0, |acc, &b| (acc << 1) | u32::from(b & 1))
    }

    pub fn push_label_bits(&self, label: u32, out: &mut Vec<u8>) {
        for k in (0..self.bits_per_symbol).rev() {
            out.push(((label >> k) & 1) as u8);
        }
    }

    pub fn mean_energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const KINDS: [ConstellationKind; 3] =
        [ConstellationKind::Qpsk, ConstellationKind::Psk8, ConstellationKind::Qam16];

    #[test]
    fn energy_and_half_width() {
        for kind in KINDS {
            for es in [1.0, 2.5] {
                let c = Constellation::new(kind, es);
                assert!((c.mean_energy() - es).abs() < 1e-12, "{kind:?}");
            }
        }
        let qam = Constellation::new(ConstellationKind::Qam16, 1.0);
        assert!((qam.half_width() - 3.0 / libm::sqrt(10.0)).abs() < 1e-15);
        let psk = Constellation::new(ConstellationKind::Psk8, 1.0);
        assert_eq!(psk.half_width(), 1.0);
        let qpsk = Constellation::new(ConstellationKind::Qpsk, 1.0);
        assert!((qpsk.half_width() - libm::sqrt(0.5)).abs() < 1e-15);
    }

    #[test]
    fn nearest_neighbours_differ_in_one_bit() {
        for kind in KINDS {
            let c = Constellation::new(kind, 1.0);
            let pts = c.points();
            let dmin = (0..pts.len())
                .flat_map(|i| (0..pts.len()).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| (pts[i] - pts[j]).norm())
                .fold(f64::INFINITY, f64::min);
            for i in 0..pts.len() {
                for j in 0..pts.len() {
                    if i != j && (pts[i] - pts[j]).norm() < dmin * (1.0 + 1e-9) {
                        let diff = c.labels()[i] ^ c.labels()[j];
                        assert_eq!(diff.count_ones(), 1, "{kind:?} {i} {j}");
                    }
                }
            }
        }
    }

    #[test]
    fn labels_are_a_permutation() {
        for kind in KINDS {
            let c = Constellation::new(kind, 1.0);
            let mut l = c.labels().to_vec();
            l.sort();
            assert_eq!(l, (0..c.len() as u32).collect::<Vec<_>>());
            for &label in c.labels() {
                let mut bits = Vec::new();
                c.push_label_bits(label, &mut bits);
                assert_eq!(c.label_from_bits(&bits), label);
            }
        }
    }

    #[test]
    fn nearest_ties_break_low() {
        let c = Constellation::new(ConstellationKind::Qam16, 1.0);
        let i = c.nearest(Complex64::new(0.0, 0.0));
        // the four inner points are equidistant from the origin
        let inner: Vec<usize> = (0..16)
            .filter(|&k| (c.points()[k].norm_sqr() - 0.2).abs() < 1e-12)
            .collect();
        assert_eq!(i, inner[0]);
    }
}

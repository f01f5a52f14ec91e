use super::GrayImage;

/// Gaussian image pyramid; level 0 is full resolution.
#[derive(Debug, Clone)]
pub struct Pyramid {
    levels: Vec<GrayImage>,
}

impl Pyramid {
    /// Builds up to `num_levels` levels, stopping early when a level would drop
    /// below `min_side` pixels.
    pub fn build(base: GrayImage, num_levels: usize, min_side: usize) -> Self {
        let mut levels = vec![base];
        while levels.len() < num_levels {
            let last = levels.last().expect("non-empty");
            if last.width / 2 < min_side || last.height / 2 < min_side {
                break;
            }
            levels.push(pyr_down(last));
        }
        Self { levels }
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, i: usize) -> &GrayImage {
        &self.levels[i]
    }
}

/// Separable 5-tap binomial blur, clamped at the border.
pub fn blur(img: &GrayImage) -> GrayImage {
    const K: [f32; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
    let (w, h) = (img.width, img.height);
    let mut tmp = vec![0.0f32; w * h];
    for y in 0..h {
        let row = &img.data[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &kv) in K.iter().enumerate() {
                let xx = (x as isize + k as isize - 2).clamp(0, w as isize - 1) as usize;
                acc += kv * row[xx];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0f32; w * h];
    for y in 0..h {
        for (k, &kv) in K.iter().enumerate() {
            let yy = (y as isize + k as isize - 2).clamp(0, h as isize - 1) as usize;
            let src = &tmp[yy * w..(yy + 1) * w];
            let dst = &mut out[y * w..(y + 1) * w];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += kv * s;
            }
        }
    }
    GrayImage::new(w, h, out)
}

/// Blur then decimate by two.
pub fn pyr_down(img: &GrayImage) -> GrayImage {
    let b = blur(img);
    let (w, h) = (img.width / 2, img.height / 2);
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            // average the 2x2 block of the blurred image so level k pixel
            // centres sit at 2^k * (x + 0.5) - 0.5 in base coordinates
            let s = b.at(2 * x, 2 * y) + b.at(2 * x + 1, 2 * y) + b.at(2 * x, 2 * y + 1) + b.at(2 * x + 1, 2 * y + 1);
            data.push(0.25 * s);
        }
    }
    GrayImage::new(w, h, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_stays_constant() {
        let img = GrayImage::new(16, 12, vec![7.0; 16 * 12]);
        let p = Pyramid::build(img, 4, 2);
        assert_eq!(p.num_levels(), 3);
        for i in 0..p.num_levels() {
            assert!(p.level(i).data().iter().all(|&v| (v - 7.0).abs() < 1e-5));
        }
        assert_eq!(p.level(2).width(), 4);
    }
}

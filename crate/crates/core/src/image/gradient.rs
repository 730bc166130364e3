use super::GrayImage;

/// Intensity derivatives of an image, in intensity units per pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientField {
    width: usize,
    height: usize,
    pub fx: Vec<f64>,
    pub fy: Vec<f64>,
}

impl GradientField {
    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.fx[i], self.fy[i])
    }
}

/// Central differences in the interior, one-sided differences on the border.
pub fn gradients(img: &GrayImage) -> GradientField {
    let (w, h) = (img.width(), img.height());
    let mut fx = vec![0.0; w * h];
    let mut fy = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let gx = if x == 0 {
                img.get(1, y) - img.get(0, y)
            } else if x == w - 1 {
                img.get(w - 1, y) - img.get(w - 2, y)
            } else {
                0.5 * (img.get(x + 1, y) - img.get(x - 1, y))
            };
            let gy = if y == 0 {
                img.get(x, 1) - img.get(x, 0)
            } else if y == h - 1 {
                img.get(x, h - 1) - img.get(x, h - 2)
            } else {
                0.5 * (img.get(x, y + 1) - img.get(x, y - 1))
            };
            fx[y * w + x] = gx;
            fy[y * w + x] = gy;
        }
    }
    GradientField {
        width: w,
        height: h,
        fx,
        fy,
    }
}

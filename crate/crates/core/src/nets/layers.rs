use alloc::vec::Vec;

/// One step of a compiled network. Offsets index the flat parameter vector;
/// weights come first, then biases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    /// Weights laid out `[input][output]`.
    Dense {
        input: usize,
        output: usize,
        offset: usize,
    },
    /// Valid stride-1 convolution over an HWC feature map.
    /// Weights laid out `[ky][kx][c_in][c_out]`.
    Conv {
        height: usize,
        width: usize,
        c_in: usize,
        c_out: usize,
        kernel: usize,
        offset: usize,
    },
    Relu {
        len: usize,
    },
    /// Non-overlapping max pooling; trailing rows/columns are dropped.
    MaxPool {
        height: usize,
        width: usize,
        channels: usize,
        pool: usize,
    },
}

impl Layer {
    pub fn input_len(&self) -> usize {
        match *self {
            Layer::Dense { input, .. } => input,
            Layer::Conv { height, width, c_in, .. } => height * width * c_in,
            Layer::Relu { len } => len,
            Layer::MaxPool { height, width, channels, .. } => height * width * channels,
        }
    }

    pub fn output_len(&self) -> usize {
        match *self {
            Layer::Dense { output, .. } => output,
            Layer::Conv { height, width, c_out, kernel, .. } => (height - kernel + 1) * (width - kernel + 1) * c_out,
            Layer::Relu { len } => len,
            Layer::MaxPool { height, width, channels, pool } => (height / pool) * (width / pool) * channels,
        }
    }

    pub fn parameter_count(&self) -> usize {
        match *self {
            Layer::Dense { input, output, .. } => input * output + output,
            Layer::Conv { c_in, c_out, kernel, .. } => kernel * kernel * c_in * c_out + c_out,
            Layer::Relu { .. } | Layer::MaxPool { .. } => 0,
        }
    }

    /// (fan_in, fan_out) for layers that carry parameters.
    pub fn fans(&self) -> Option<(usize, usize)> {
        match *self {
            Layer::Dense { input, output, .. } => Some((input, output)),
            Layer::Conv { c_in, c_out, kernel, .. } => Some((kernel * kernel * c_in, kernel * kernel * c_out)),
            Layer::Relu { .. } | Layer::MaxPool { .. } => None,
        }
    }
}

/// Activation and delta buffers for one forward/backward pass, reused across
/// samples.
pub(crate) struct Scratch {
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
    argmax: Vec<Vec<u32>>,
}

impl Scratch {
    pub fn new(plan: &[Layer]) -> Self {
        let mut acts = Vec::with_capacity(plan.len() + 1);
        acts.push(alloc::vec![0.0; plan.first().map_or(0, Layer::input_len)]);
        for l in plan {
            acts.push(alloc::vec![0.0; l.output_len()]);
        }
        let deltas = acts.iter().map(|a| alloc::vec![0.0; a.len()]).collect();
        let argmax = plan
            .iter()
            .map(|l| match l {
                Layer::MaxPool { .. } => alloc::vec![0u32; l.output_len()],
                _ => Vec::new(),
            })
            .collect();
        Self { acts, deltas, argmax }
    }

    pub fn output_mut(&mut self) -> &mut [f64] {
        self.acts.last_mut().expect("plan is non-empty")
    }

    pub fn output_and_delta(&mut self) -> (&[f64], &mut [f64]) {
        let out = self.acts.last().expect("plan is non-empty");
        let delta = self.deltas.last_mut().expect("plan is non-empty");
        (out, delta)
    }

    pub fn forward(&mut self, plan: &[Layer], params: &[f64], x: &[f64]) {
        self.acts[0].copy_from_slice(x);
        for (i, layer) in plan.iter().enumerate() {
            let (before, after) = self.acts.split_at_mut(i + 1);
            let input = &before[i];
            let out = &mut after[0];
            match *layer {
                Layer::Dense { input: n_in, output: n_out, offset } => {
                    let (w, b) = params[offset..offset + n_in * n_out + n_out].split_at(n_in * n_out);
                    out.copy_from_slice(b);
                    for (xi, row) in input.iter().zip(w.chunks_exact(n_out)) {
                        if *xi == 0.0 {
                            continue;
                        }
                        for (o, wv) in out.iter_mut().zip(row) {
                            *o += xi * wv;
                        }
                    }
                }
                Layer::Conv { height: _, width, c_in, c_out, kernel, offset } => {
                    let nw = kernel * kernel * c_in * c_out;
                    let (w, b) = params[offset..offset + nw + c_out].split_at(nw);
                    let ow = width - kernel + 1;
                    for (pos, cell) in out.chunks_exact_mut(c_out).enumerate() {
                        let (oy, ox) = (pos / ow, pos % ow);
                        cell.copy_from_slice(b);
                        for ky in 0..kernel {
                            for kx in 0..kernel {
                                let base = ((oy + ky) * width + ox + kx) * c_in;
                                let wbase = (ky * kernel + kx) * c_in;
                                for c in 0..c_in {
                                    let v = input[base + c];
                                    if v == 0.0 {
                                        continue;
                                    }
                                    let row = &w[(wbase + c) * c_out..(wbase + c + 1) * c_out];
                                    for (o, wv) in cell.iter_mut().zip(row) {
                                        *o += v * wv;
                                    }
                                }
                            }
                        }
                    }
                }
                Layer::Relu { .. } => {
                    for (o, &v) in out.iter_mut().zip(input.iter()) {
                        *o = if v > 0.0 { v } else { 0.0 };
                    }
                }
                Layer::MaxPool { height: _, width, channels, pool } => {
                    let pw = width / pool;
                    let idx = &mut self.argmax[i];
                    for (o, slot) in out.iter_mut().enumerate() {
                        let c = o % channels;
                        let cellpos = o / channels;
                        let (py, px) = (cellpos / pw, cellpos % pw);
                        let mut best = usize::MAX;
                        let mut best_v = f64::NEG_INFINITY;
                        for dy in 0..pool {
                            for dx in 0..pool {
                                let j = ((py * pool + dy) * width + px * pool + dx) * channels + c;
                                if input[j] > best_v {
                                    best_v = input[j];
                                    best = j;
                                }
                            }
                        }
                        *slot = best_v;
                        idx[o] = best as u32;
                    }
                }
            }
        }
    }

    /// Backpropagates the delta stored at the output, accumulating parameter
    /// gradients into `grad`.
    pub fn backward(&mut self, plan: &[Layer], params: &[f64], grad: &mut [f64]) {
        for (i, layer) in plan.iter().enumerate().rev() {
            let input = &self.acts[i];
            let output = &self.acts[i + 1];
            let (dbefore, dafter) = self.deltas.split_at_mut(i + 1);
            let d_out = &dafter[0];
            let d_in = &mut dbefore[i];
            let need_input_grad = i > 0;
            match *layer {
                Layer::Dense { input: n_in, output: n_out, offset } => {
                    let (gw, gb) = grad[offset..offset + n_in * n_out + n_out].split_at_mut(n_in * n_out);
                    for (g, d) in gb.iter_mut().zip(d_out.iter()) {
                        *g += d;
                    }
                    let w = &params[offset..offset + n_in * n_out];
                    for (k, (grow, wrow)) in gw.chunks_exact_mut(n_out).zip(w.chunks_exact(n_out)).enumerate() {
                        let xi = input[k];
                        if xi != 0.0 {
                            for (g, d) in grow.iter_mut().zip(d_out.iter()) {
                                *g += xi * d;
                            }
                        }
                        if need_input_grad {
                            d_in[k] = wrow.iter().zip(d_out.iter()).map(|(a, b)| a * b).sum();
                        }
                    }
                }
                Layer::Conv { height: _, width, c_in, c_out, kernel, offset } => {
                    let nw = kernel * kernel * c_in * c_out;
                    let (gw, gb) = grad[offset..offset + nw + c_out].split_at_mut(nw);
                    let w = &params[offset..offset + nw];
                    if need_input_grad {
                        d_in.iter_mut().for_each(|v| *v = 0.0);
                    }
                    let ow = width - kernel + 1;
                    for (pos, dcell) in d_out.chunks_exact(c_out).enumerate() {
                        if dcell.iter().all(|&d| d == 0.0) {
                            continue;
                        }
                        for (g, d) in gb.iter_mut().zip(dcell) {
                            *g += d;
                        }
                        let (oy, ox) = (pos / ow, pos % ow);
                        for ky in 0..kernel {
                            for kx in 0..kernel {
                                let base = ((oy + ky) * width + ox + kx) * c_in;
                                let wbase = (ky * kernel + kx) * c_in;
                                for c in 0..c_in {
                                    let r = (wbase + c) * c_out..(wbase + c + 1) * c_out;
                                    let v = input[base + c];
                                    if v != 0.0 {
                                        for (g, d) in gw[r.clone()].iter_mut().zip(dcell) {
                                            *g += v * d;
                                        }
                                    }
                                    if need_input_grad {
                                        d_in[base + c] += w[r].iter().zip(dcell).map(|(a, b)| a * b).sum::<f64>();
                                    }
                                }
                            }
                        }
                    }
                }
                Layer::Relu { .. } => {
                    if need_input_grad {
                        for ((di, &d), &o) in d_in.iter_mut().zip(d_out.iter()).zip(output.iter()) {
                            *di = if o > 0.0 { d } else { 0.0 };
                        }
                    }
                }
                Layer::MaxPool { .. } => {
                    if need_input_grad {
                        d_in.iter_mut().for_each(|v| *v = 0.0);
                        for (o, &j) in self.argmax[i].iter().enumerate() {
                            d_in[j as usize] += d_out[o];
                        }
                    }
                }
            }
        }
    }
}

/// Fixed 256-entry black → purple → red → yellow → white ramp.
pub fn heat_ramp() -> [[u8; 3]; 256] {
    const STOPS: [(f32, [f32; 3]); 5] = [
        (0.0, [0.0, 0.0, 0.0]),
        (0.3, [0.35, 0.05, 0.55]),
        (0.6, [0.9, 0.2, 0.15]),
        (0.85, [1.0, 0.8, 0.1]),
        (1.0, [1.0, 1.0, 1.0]),
    ];
    let mut out = [[0u8; 3]; 256];
    for (i, px) in out.iter_mut().enumerate() {
        let t = i as f32 / 255.0;
        let k = STOPS.windows(2).position(|w| t <= w[1].0).unwrap_or(STOPS.len() - 2);
        let ((t0, c0), (t1, c1)) = (STOPS[k], STOPS[k + 1]);
        let f = (t - t0) / (t1 - t0);
        for ch in 0..3 {
            px[ch] = ((c0[ch] + f * (c1[ch] - c0[ch])) * 255.0).round() as u8;
        }
    }
    out
}

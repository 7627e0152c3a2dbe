//! Independent reference implementations used as oracles by the integration
//! and acceptance suites. Deliberately built differently from the library:
//! the digest reference derives its constants from the sine function at run
//! time and walks four explicit rounds; the cipher reference derives its
//! substitution box algebraically over GF(2^8) and works on a 4x4 matrix.
//! A constant typo or a wrong round structure in either side cannot cancel
//! out.

#![allow(dead_code)]

// ---- reference MD5 ---------------------------------------------------------

fn sine_constants() -> [u32; 64] {
    let mut k = [0u32; 64];
    for (i, slot) in k.iter_mut().enumerate() {
        *slot = (((i as f64 + 1.0).sin().abs()) * 4294967296.0).floor() as u32;
    }
    k
}

pub fn ref_md5(message: &[u8]) -> [u8; 16] {
    let k = sine_constants();
    let bit_len = (message.len() as u64).wrapping_mul(8);
    let mut data = message.to_vec();
    data.push(0x80);
    while data.len() % 64 != 56 {
        data.push(0);
    }
    data.extend_from_slice(&bit_len.to_le_bytes());

    let (mut a0, mut b0, mut c0, mut d0) =
        (0x67452301u32, 0xefcdab89u32, 0x98badcfeu32, 0x10325476u32);

    for block in data.chunks_exact(64) {
        let mut x = [0u32; 16];
        for (i, word) in x.iter_mut().enumerate() {
            *word = u32::from_le_bytes(block[4 * i..4 * i + 4].try_into().unwrap());
        }
        let (mut a, mut b, mut c, mut d) = (a0, b0, c0, d0);

        let op = |a: u32, b: u32, f: u32, m: u32, kc: u32, s: u32| {
            b.wrapping_add(
                a.wrapping_add(f)
                    .wrapping_add(m)
                    .wrapping_add(kc)
                    .rotate_left(s),
            )
        };

        // round 1: F = (b & c) | (!b & d), message order j
        const S1: [u32; 4] = [7, 12, 17, 22];
        for j in 0..16 {
            let f = (b & c) | (!b & d);
            let na = op(a, b, f, x[j], k[j], S1[j % 4]);
            a = d;
            d = c;
            c = b;
            b = na;
        }
        // round 2: G = (d & b) | (!d & c), message order (1 + 5j) mod 16
        const S2: [u32; 4] = [5, 9, 14, 20];
        for j in 0..16 {
            let g = (d & b) | (!d & c);
            let na = op(a, b, g, x[(1 + 5 * j) % 16], k[16 + j], S2[j % 4]);
            a = d;
            d = c;
            c = b;
            b = na;
        }
        // round 3: H = b ^ c ^ d, message order (5 + 3j) mod 16
        const S3: [u32; 4] = [4, 11, 16, 23];
        for j in 0..16 {
            let h = b ^ c ^ d;
            let na = op(a, b, h, x[(5 + 3 * j) % 16], k[32 + j], S3[j % 4]);
            a = d;
            d = c;
            c = b;
            b = na;
        }
        // round 4: I = c ^ (b | !d), message order (7j) mod 16
        const S4: [u32; 4] = [6, 10, 15, 21];
        for j in 0..16 {
            let i_f = c ^ (b | !d);
            let na = op(a, b, i_f, x[(7 * j) % 16], k[48 + j], S4[j % 4]);
            a = d;
            d = c;
            c = b;
            b = na;
        }

        a0 = a0.wrapping_add(a);
        b0 = b0.wrapping_add(b);
        c0 = c0.wrapping_add(c);
        d0 = d0.wrapping_add(d);
    }

    let mut out = [0u8; 16];
    out[0..4].copy_from_slice(&a0.to_le_bytes());
    out[4..8].copy_from_slice(&b0.to_le_bytes());
    out[8..12].copy_from_slice(&c0.to_le_bytes());
    out[12..16].copy_from_slice(&d0.to_le_bytes());
    out
}

// ---- reference AES-128 ------------------------------------------------------

fn gmul(mut a: u8, mut b: u8) -> u8 {
    let mut p = 0u8;
    for _ in 0..8 {
        if b & 1 != 0 {
            p ^= a;
        }
        let carry = a & 0x80 != 0;
        a <<= 1;
        if carry {
            a ^= 0x1b;
        }
        b >>= 1;
    }
    p
}

fn ginv(a: u8) -> u8 {
    if a == 0 {
        return 0;
    }
    for x in 1..=255u8 {
        if gmul(a, x) == 1 {
            return x;
        }
    }
    unreachable!("every nonzero element has an inverse");
}

fn algebraic_sbox() -> [u8; 256] {
    let mut sbox = [0u8; 256];
    for (i, slot) in sbox.iter_mut().enumerate() {
        let inv = ginv(i as u8);
        *slot = inv
            ^ inv.rotate_left(1)
            ^ inv.rotate_left(2)
            ^ inv.rotate_left(3)
            ^ inv.rotate_left(4)
            ^ 0x63;
    }
    sbox
}

fn expand_key_words(key: &[u8; 16], sbox: &[u8; 256]) -> [[u8; 4]; 44] {
    let mut w = [[0u8; 4]; 44];
    for i in 0..4 {
        w[i].copy_from_slice(&key[4 * i..4 * i + 4]);
    }
    let mut rcon = 1u8;
    for i in 4..44 {
        let mut t = w[i - 1];
        if i % 4 == 0 {
            t = [
                sbox[t[1] as usize] ^ rcon,
                sbox[t[2] as usize],
                sbox[t[3] as usize],
                sbox[t[0] as usize],
            ];
            rcon = gmul(rcon, 2);
        }
        for j in 0..4 {
            w[i][j] = w[i - 4][j] ^ t[j];
        }
    }
    w
}

type Mat = [[u8; 4]; 4]; // state[row][col]

fn to_matrix(block: &[u8; 16]) -> Mat {
    let mut m = [[0u8; 4]; 4];
    for c in 0..4 {
        for r in 0..4 {
            m[r][c] = block[r + 4 * c];
        }
    }
    m
}

fn from_matrix(m: &Mat) -> [u8; 16] {
    let mut out = [0u8; 16];
    for c in 0..4 {
        for r in 0..4 {
            out[r + 4 * c] = m[r][c];
        }
    }
    out
}

fn add_round_key(state: &mut Mat, words: &[[u8; 4]]) {
    for c in 0..4 {
        for r in 0..4 {
            state[r][c] ^= words[c][r];
        }
    }
}

pub fn ref_aes128_encrypt(block: &[u8; 16], key: &[u8; 16]) -> [u8; 16] {
    let sbox = algebraic_sbox();
    let w = expand_key_words(key, &sbox);
    let mut state = to_matrix(block);

    add_round_key(&mut state, &w[0..4]);
    for round in 1..=10 {
        // SubBytes
        for row in state.iter_mut() {
            for cell in row.iter_mut() {
                *cell = sbox[*cell as usize];
            }
        }
        // ShiftRows
        for (r, row) in state.iter_mut().enumerate() {
            row.rotate_left(r);
        }
        // MixColumns on every round but the last
        if round != 10 {
            for c in 0..4 {
                let col = [state[0][c], state[1][c], state[2][c], state[3][c]];
                state[0][c] = gmul(col[0], 2) ^ gmul(col[1], 3) ^ col[2] ^ col[3];
                state[1][c] = col[0] ^ gmul(col[1], 2) ^ gmul(col[2], 3) ^ col[3];
                state[2][c] = col[0] ^ col[1] ^ gmul(col[2], 2) ^ gmul(col[3], 3);
                state[3][c] = gmul(col[0], 3) ^ col[1] ^ col[2] ^ gmul(col[3], 2);
            }
        }
        add_round_key(&mut state, &w[4 * round..4 * round + 4]);
    }
    from_matrix(&state)
}

// ---- trust-machine oracle ----------------------------------------------------

/// Recompute the alert-level trajectory by direct recurrence: add the weight;
/// a level above the threshold resets to zero when the vote confirms (reboot)
/// or parks at the threshold when it does not (demotion to suspected).
pub fn oracle_trust_trajectory(
    weights: &[u32],
    tc: u32,
    vote_confirms: bool,
) -> Vec<(u32, &'static str)> {
    let mut level = 0u32;
    let mut out = Vec::with_capacity(weights.len());
    for &w in weights {
        level += w;
        if level > tc {
            level = if vote_confirms { 0 } else { tc };
        }
        let state = if level == 0 {
            "trustworthy"
        } else {
            "suspected"
        };
        out.push((level, state));
    }
    out
}

/// All sequences over `alphabet` of length 1..=max_len.
pub fn all_sequences(alphabet: &[u32], max_len: usize) -> Vec<Vec<u32>> {
    let mut out: Vec<Vec<u32>> = Vec::new();
    let mut frontier: Vec<Vec<u32>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for prefix in &frontier {
            for &w in alphabet {
                let mut seq = prefix.clone();
                seq.push(w);
                out.push(seq.clone());
                next.push(seq);
            }
        }
        frontier = next;
    }
    out
}

// ---- rank-correlation oracle ----------------------------------------------

/// Brute-force rank correlation over integer arithmetic: returns
/// (denom - factor * sum_d2) / denom evaluated as a rational.
pub fn oracle_rank_corr(a: &[u32], b: &[u32], factor: i64) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as i64;
    let mut sum_d2: i64 = 0;
    for i in 0..a.len() {
        let d = a[i] as i64 - b[i] as i64;
        sum_d2 += d * d;
    }
    let denom = n * (n * n - 1);
    (denom - factor * sum_d2) as f64 / denom as f64
}

//! 3D Morton (Z-order) and Hilbert indices on a `2^b` grid per axis.

use super::TokenizerError;

/// Largest supported bits per axis (3·21 = 63 index bits).
pub const MAX_BITS: u32 = 21;

fn check(cell: [u64; 3], bits: u32) -> Result<(), TokenizerError> {
    if bits == 0 || bits > MAX_BITS {
        return Err(TokenizerError::Argument(format!(
            "bits must be in 1..={MAX_BITS}, got {bits}"
        )));
    }
    for c in cell {
        if c >> bits != 0 {
            return Err(TokenizerError::CellRange { coord: c, bits });
        }
    }
    Ok(())
}

/// Bit `j` of x → index bit `3j`, of y → `3j+1`, of z → `3j+2`.
pub fn morton_encode(cell: [u64; 3], bits: u32) -> Result<u64, TokenizerError> {
    check(cell, bits)?;
    let mut out = 0u64;
    for j in 0..bits {
        for (axis, c) in cell.iter().enumerate() {
            out |= ((c >> j) & 1) << (3 * j + axis as u32);
        }
    }
    Ok(out)
}

pub fn morton_decode(index: u64, bits: u32) -> [u64; 3] {
    let mut cell = [0u64; 3];
    for j in 0..bits {
        for (axis, c) in cell.iter_mut().enumerate() {
            *c |= ((index >> (3 * j + axis as u32)) & 1) << j;
        }
    }
    cell
}

/// Hilbert index via Skilling's transpose construction.
pub fn hilbert_encode(cell: [u64; 3], bits: u32) -> Result<u64, TokenizerError> {
    check(cell, bits)?;
    let mut x = cell;
    let m = 1u64 << (bits - 1);

    // inverse undo
    let mut q = m;
    while q > 1 {
        let p = q - 1;
        for i in 0..3 {
            if x[i] & q != 0 {
                x[0] ^= p;
            } else {
                let t = (x[0] ^ x[i]) & p;
                x[0] ^= t;
                x[i] ^= t;
            }
        }
        q >>= 1;
    }
    // gray encode
    for i in 1..3 {
        x[i] ^= x[i - 1];
    }
    let mut t = 0;
    let mut q = m;
    while q > 1 {
        if x[2] & q != 0 {
            t ^= q - 1;
        }
        q >>= 1;
    }
    for v in &mut x {
        *v ^= t;
    }

    // transpose → index, most significant level first, x[0] leading
    let mut index = 0u64;
    for j in (0..bits).rev() {
        for v in &x {
            index = (index << 1) | ((v >> j) & 1);
        }
    }
    Ok(index)
}

pub fn hilbert_decode(index: u64, bits: u32) -> [u64; 3] {
    let mut x = [0u64; 3];
    let mut k = 3 * bits;
    for j in (0..bits).rev() {
        for v in &mut x {
            k -= 1;
            *v |= ((index >> k) & 1) << j;
        }
    }

    let n = 2u64 << (bits - 1);
    // gray decode
    let t = x[2] >> 1;
    for i in (1..3).rev() {
        x[i] ^= x[i - 1];
    }
    x[0] ^= t;
    // undo excess work
    let mut q = 2;
    while q != n {
        let p = q - 1;
        for i in (0..3).rev() {
            if x[i] & q != 0 {
                x[0] ^= p;
            } else {
                let t = (x[0] ^ x[i]) & p;
                x[0] ^= t;
                x[i] ^= t;
            }
        }
        q <<= 1;
    }
    x
}

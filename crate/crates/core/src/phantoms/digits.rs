//! Ten hand-drawn digit masks, 10 wide by 14 tall. Rows run along z
//! (depth), columns along x.

use ndarray::Array2;

const DIGITS: [&str; 10] = [
    "
..######..
.##....##.
##......##
##......##
##......##
##......##
##......##
##......##
##......##
##......##
##......##
##......##
.##....##.
..######..",
    "
....##....
...###....
..####....
.##.##....
....##....
....##....
....##....
....##....
....##....
....##....
....##....
....##....
....##....
.########.",
    "
..######..
.##....##.
##......##
........##
........##
.......##.
......##..
.....##...
....##....
...##.....
..##......
.##.......
##........
##########",
    "
.#######..
##.....##.
........##
........##
........##
.......##.
..#####...
.......##.
........##
........##
........##
........##
##.....##.
.#######..",
    "
......##..
.....###..
....####..
...##.##..
..##..##..
.##...##..
##....##..
##########
......##..
......##..
......##..
......##..
......##..
......##..",
    "
##########
##........
##........
##........
##........
#######...
.......##.
........##
........##
........##
........##
........##
##.....##.
.#######..",
    "
...#####..
..##......
.##.......
##........
##........
##........
##.#####..
###....##.
##......##
##......##
##......##
##......##
.##....##.
..######..",
    "
##########
........##
.......##.
.......##.
......##..
......##..
.....##...
.....##...
....##....
....##....
...##.....
...##.....
..##......
..##......",
    "
..######..
.##....##.
##......##
##......##
##......##
.##....##.
..######..
.##....##.
##......##
##......##
##......##
##......##
.##....##.
..######..",
    "
..######..
.##....##.
##......##
##......##
##......##
##......##
.##....###
..#####.##
........##
........##
........##
.......##.
......##..
..#####...",
];

/// Mask of digit `d` (0-9) indexed `[x, z]`.
pub fn digit_mask(d: usize) -> Array2<bool> {
    let rows: Vec<&str> = DIGITS[d % 10].lines().filter(|l| !l.is_empty()).collect();
    let (nz, nx) = (rows.len(), rows[0].len());
    Array2::from_shape_fn((nx, nz), |(x, z)| rows[z].as_bytes()[x] == b'#')
}

pub const DIGIT_COUNT: usize = 10;

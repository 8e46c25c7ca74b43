//! Data-parallel map over independent jobs. With the `parallel` feature off,
//! or through [`map_sequential`], jobs run in order on the calling thread.

#[cfg(feature = "parallel")]
pub fn map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    map_sequential(items, f)
}

pub fn map_sequential<T, R>(items: &[T], f: impl Fn(&T) -> R) -> Vec<R> {
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    #[test]
    fn order_preserved() {
        let xs: Vec<u64> = (0..1000).collect();
        let squares = super::map(&xs, |x| x * x);
        assert_eq!(squares, super::map_sequential(&xs, |x| x * x));
    }
}

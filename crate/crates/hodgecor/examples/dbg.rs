fn main() {
    println!("threads: {}", rayon::current_num_threads());
    let workers = rayon::current_num_threads().max(1) as u64;
    let pairs = 200_000u64;
    let per_worker = (pairs + workers - 1) / workers;
    println!("workers {workers}, per_worker {per_worker}, total {}", workers * per_worker);
}

fn main() { println!("exforge"); }

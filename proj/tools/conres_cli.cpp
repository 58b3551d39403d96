// placeholder; full CLI lands with the training module
int main() { return 0; }

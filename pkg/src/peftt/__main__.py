from peftt.cli import main

main()

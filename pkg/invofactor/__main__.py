from invofactor.cli import main

main()

from psman.cli import main

main()

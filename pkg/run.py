from app import create_app
from app.cli import lab_cli

app = create_app()

if __name__ == '__main__':
    with app.app_context():
        lab_cli.main(prog_name='maglab')
